"""Command-line entry point.

Subcommands map one-to-one onto experiment kinds:

    identities        exact-identity suite, JSON report, exit 1 on failure
    norms             norm sanity suite, JSON report, exit 1 on failure
    katz              dimension-growth ratio scan, CSV/JSON table
    commutator-scan   commutator depth-stability scan, CSV/JSON table
    theta-scan        theta-operator ratio scan, CSV/JSON table
    opnorm            evaluate an operator expression on seeded symbols

Values come from explicit flags first, then an optional JSON config file
(--config), then built-in defaults.  Exit codes: 0 success / suite passed,
1 suite failed or runtime error, 2 usage error.  The PARALAB_THREADS
environment variable caps worker threads (0 = auto).
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import (
    ExperimentConfig,
    report_json,
    run_experiment,
    write_report,
)

_SUITE_KINDS = ("identities", "norms")


def _add_common(parser: argparse.ArgumentParser, *, d=2, depth=3, dim=2, p=2.0,
                trials=50, seed=0):
    parser.add_argument("--d", type=int, default=d, help="branching factor")
    parser.add_argument("--depth", type=int, default=depth, help="lattice depth N")
    parser.add_argument("--dim", type=int, default=dim, help="matrix dimension m")
    parser.add_argument("--p", type=float, default=p, help="integrability exponent")
    parser.add_argument("--trials", type=int, default=trials, help="random trials")
    parser.add_argument("--seed", type=int, default=seed, help="base seed")
    parser.add_argument("--out", default=None, help="output file (required)")
    parser.add_argument("--format", choices=("json", "csv"), default=None,
                        help="output format; default from --out extension, else json")
    parser.add_argument("--tol", type=float, default=1.0,
                        help="tolerance scale: case tolerances are multiplied by this")
    parser.add_argument("--config", default=None,
                        help="JSON config file; explicit flags override its values")
    parser.add_argument("--threads", type=int, default=0,
                        help="worker threads (0 = auto); PARALAB_THREADS overrides")


def _add_search(parser: argparse.ArgumentParser, *, restarts=2, max_iters=120):
    parser.add_argument("--restarts", type=int, default=restarts,
                        help="independent search starts")
    parser.add_argument("--max-iters", type=int, default=max_iters,
                        help="ratio evaluations per search start")
    parser.add_argument("--step-init", type=float, default=0.5, help="initial step")
    parser.add_argument("--step-shrink", type=float, default=0.5,
                        help="step multiplier on stalled passes")
    parser.add_argument("--search-tol", type=float, default=1e-4,
                        help="stop searching when the step falls below this")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paralab",
        description="Numerical laboratory for matrix-valued martingale paraproducts.",
        allow_abbrev=False,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def subparser(name, help_text, **defaults):
        p = sub.add_parser(
            name, help=help_text, allow_abbrev=False,
            formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        )
        _add_common(p, **defaults)
        return p

    subparser("identities", "verify every exact identity on random instances")
    subparser("norms", "verify norm sanity properties and record monitored statistics")

    katz = subparser("katz", "paraproduct-norm growth in the matrix dimension",
                     depth=4, trials=0)
    katz.add_argument("--dims", default="1,2,4,8",
                      help="comma-separated matrix dimensions (ascending powers of two)")
    _add_search(katz)

    comm = subparser("commutator-scan", "commutator ratio stability across depths",
                     depth=4, trials=200)
    comm.add_argument("--depths", default="4,6",
                      help="comma-separated lattice depths to compare")
    _add_search(comm)

    theta = subparser("theta-scan", "theta-operator ratio statistics", depth=4,
                      trials=200)
    _add_search(theta)

    op = subparser("opnorm", "operator norm of a symbolic expression")
    op.add_argument("--spec", default=None,
                    help="operator text, e.g. 'commutator(pi(a), mult(b))'; "
                         "symbol names draw seeded random mean-zero instances")
    op.add_argument("--scalar", default="a",
                    help="comma-separated symbol names drawn scalar-valued")
    _add_search(op)
    return parser


def _explicit_flags(argv: list[str]) -> set[str]:
    """Destinations of options literally present on the command line."""
    explicit = set()
    for tok in argv:
        if tok.startswith("--"):
            explicit.add(tok[2:].split("=", 1)[0].replace("-", "_"))
    return explicit


def _merge_config(args, parser, sub_argv) -> argparse.Namespace:
    if not args.config:
        return args
    try:
        with open(args.config) as handle:
            overrides = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config file {args.config}: {exc}")
    if not isinstance(overrides, dict):
        parser.error(f"config file {args.config} must hold a JSON object")
    explicit = _explicit_flags(sub_argv)
    valid = set(vars(args))
    for key, value in overrides.items():
        dest = key.replace("-", "_")
        if dest not in valid:
            parser.error(f"unknown key {key!r} in config file {args.config}")
        if dest not in explicit:
            setattr(args, dest, value)
    return args


def _parse_int_list(text, flag, parser) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    try:
        return tuple(int(tok) for tok in str(text).split(",") if tok.strip())
    except ValueError:
        parser.error(f"{flag} expects a comma-separated integer list, got {text!r}")


def _config_from_args(args, parser) -> ExperimentConfig:
    kind = args.command
    kwargs = dict(
        kind=kind,
        d=args.d,
        depth=args.depth,
        dim=args.dim,
        p=args.p,
        trials=args.trials,
        seed=args.seed,
        tol_scale=args.tol,
        threads=args.threads,
    )
    if hasattr(args, "restarts"):
        kwargs.update(
            restarts=args.restarts,
            max_iters=args.max_iters,
            step_init=args.step_init,
            step_shrink=args.step_shrink,
            search_tol=args.search_tol,
        )
    if kind == "katz":
        kwargs["dims"] = _parse_int_list(args.dims, "--dims", parser)
    if kind == "commutator-scan":
        kwargs["depths"] = _parse_int_list(args.depths, "--depths", parser)
    if kind == "opnorm":
        if not args.spec:
            parser.error("opnorm requires --spec with an operator expression")
        kwargs["spec_text"] = args.spec
        kwargs["scalar_symbols"] = tuple(
            tok.strip() for tok in str(args.scalar).split(",") if tok.strip()
        )
    try:
        return ExperimentConfig(**kwargs)
    except ValueError as exc:
        parser.error(str(exc))
        raise  # unreachable; parser.error exits


def _resolve_format(args, parser) -> str:
    fmt = args.format
    if fmt is None:
        fmt = "csv" if str(args.out).endswith(".csv") else "json"
    if args.command in _SUITE_KINDS + ("opnorm",) and fmt == "csv":
        parser.error(f"{args.command} reports are JSON only")
    return fmt


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args = _merge_config(args, parser, argv)
    if not args.out:
        parser.error("--out is required")
    fmt = _resolve_format(args, parser)
    config = _config_from_args(args, parser)

    try:
        report = run_experiment(config)
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    write_report(report, args.out, fmt)
    for case in report.cases:
        status = "PASS" if case.passed else "FAIL"
        bound = "monitored" if case.tolerance is None else f"tol={case.tolerance:g}"
        print(f"{status} {case.name}: {case.value:.6e} ({bound})")
    for row in report.rows:
        print(" ".join(f"{k}={v}" for k, v in row.items()))
    outcome = "pass" if report.pass_all else "FAIL"
    print(
        f"{config.kind}: {outcome}, wrote {args.out} [{fmt}]"
        f" in {report.wall_time:.2f} s"
    )
    if config.kind in _SUITE_KINDS:
        return 0 if report.pass_all else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
