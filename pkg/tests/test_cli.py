import json
import subprocess
import sys

import pytest

from paralab.cli import build_parser, main

SUBCOMMANDS = ["identities", "norms", "katz", "commutator-scan", "theta-scan", "opnorm"]


def run_cli(args):
    """Invoke main() in-process, normalizing SystemExit to an exit code."""
    try:
        return main(args)
    except SystemExit as exc:
        return int(exc.code or 0)


@pytest.mark.parametrize("command", SUBCOMMANDS)
def test_help_exits_zero_and_lists_flags(command, capsys):
    code = run_cli([command, "--help"])
    out = capsys.readouterr().out
    assert code == 0
    for flag in ("--d", "--depth", "--dim", "--p", "--trials", "--seed", "--out",
                 "--format", "--tol"):
        assert flag in out
    assert "default" in out


def test_identities_end_to_end(tmp_path, capsys):
    out = tmp_path / "r.json"
    code = run_cli([
        "identities", "--d", "2", "--depth", "3", "--dim", "2",
        "--trials", "10", "--seed", "7", "--out", str(out),
    ])
    assert code == 0
    data = json.loads(out.read_text())
    assert data["aggregate"]["pass_all"] is True
    assert data["schema"] == 1
    printed = capsys.readouterr().out
    assert "PASS" in printed and "FAIL " not in printed


def test_failing_suite_exit_one(tmp_path):
    out = tmp_path / "r.json"
    code = run_cli([
        "identities", "--trials", "3", "--tol", "1e-20", "--out", str(out),
    ])
    assert code == 1
    assert json.loads(out.read_text())["aggregate"]["pass_all"] is False


def test_katz_csv_rows(tmp_path):
    out = tmp_path / "k.csv"
    code = run_cli([
        "katz", "--dims", "1,2,4", "--depth", "3", "--seed", "1",
        "--restarts", "1", "--max-iters", "6", "--out", str(out),
    ])
    assert code == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "n,ratio,bmo_so,opnorm2,seed,iters"
    assert len(lines) == 4  # header + one row per dimension


def test_missing_out_exits_two(tmp_path, capsys):
    code = run_cli(["identities", "--trials", "1"])
    assert code == 2
    assert "--out" in capsys.readouterr().err
    assert list(tmp_path.iterdir()) == []


def test_unknown_flag_rejected(tmp_path, capsys):
    code = run_cli(["identities", "--bogus", "1", "--out", str(tmp_path / "x.json")])
    assert code == 2


def test_config_file_overridden_by_flags(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 99, "trials": 4}))
    out = tmp_path / "r.json"
    code = run_cli([
        "identities", "--config", str(cfg), "--seed", "5", "--trials", "2",
        "--out", str(out),
    ])
    assert code == 0
    data = json.loads(out.read_text())
    assert data["seed"] == 5  # explicit flag wins over config value
    assert data["config"]["trials"] == 2

    out2 = tmp_path / "r2.json"
    code = run_cli(["identities", "--config", str(cfg), "--out", str(out2)])
    assert code == 0
    data2 = json.loads(out2.read_text())
    assert data2["seed"] == 99 and data2["config"]["trials"] == 4


def test_config_file_rejects_unknown_keys(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bogus_key": 1}))
    code = run_cli(["identities", "--config", str(cfg), "--out", str(tmp_path / "x")])
    assert code == 2


def test_format_inference_and_suite_restriction(tmp_path, capsys):
    out = tmp_path / "t.csv"
    code = run_cli([
        "theta-scan", "--trials", "5", "--depth", "2", "--out", str(out),
    ])
    assert code == 0
    assert out.read_text().startswith("depth,p,direction,")

    code = run_cli(["identities", "--trials", "1", "--format", "csv",
                    "--out", str(tmp_path / "bad.csv")])
    assert code == 2


def test_opnorm_requires_spec(tmp_path, capsys):
    code = run_cli(["opnorm", "--out", str(tmp_path / "o.json")])
    assert code == 2
    code = run_cli([
        "opnorm", "--spec", "theta(b)", "--depth", "2", "--out",
        str(tmp_path / "o.json"),
    ])
    assert code == 0
    data = json.loads((tmp_path / "o.json").read_text())
    assert data["rows"][0]["quantity"] == "l2_opnorm"


def test_console_entry_point(tmp_path):
    out = tmp_path / "r.json"
    proc = subprocess.run(
        [sys.executable, "-m", "paralab.cli", "identities", "--trials", "2",
         "--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
