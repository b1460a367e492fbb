"""Reproducible experiment runs: identity suites, norm suites, and scans.

Every run is driven by an ExperimentConfig and produces an
ExperimentReport; reports serialize to JSON (and scans additionally to
CSV) such that rerunning the same config and seed reproduces the output
byte for byte, independent of worker count.  Wall time is measured but
written as null for exactly that reason.

Trial t draws its instances from a counter-based generator seeded with
``mix_seed(config.seed, t)``; instances follow the Gaussian
Haar-coefficient law of the sampling module.
"""

from __future__ import annotations

import json
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Callable

import numpy as np

from . import __version__ as _tool_version
from . import ncmat, norms, paraproducts as para, stepfn as sf
from .lattice import Interval, Lattice
from .opnorm import SearchParams, commutator_ratio_scan, katz_scan, l2_opnorm_result, lp_opnorm_lower
from .sampling import random_step_function
from .seeding import generator, mix_seed

SCHEMA_VERSION = 1
SCAN_KINDS = ("katz", "commutator-scan", "theta-scan")
KNOWN_KINDS = ("identities", "norms", "opnorm") + SCAN_KINDS

CSV_COLUMNS = {
    "katz": ["n", "ratio", "bmo_so", "opnorm2", "seed", "iters"],
    "commutator-scan": ["depth", "p", "sup_ratio", "q50", "q90", "trials", "seed"],
    "theta-scan": ["depth", "p", "direction", "sup_ratio", "q50", "q90", "trials", "seed"],
}


@dataclass
class ExperimentConfig:
    kind: str
    d: int = 2
    depth: int = 3
    dim: int = 2
    p: float = 2.0
    trials: int = 50
    seed: int = 0
    tol_scale: float = 1.0
    dims: tuple = (1, 2, 4, 8)
    depths: tuple = (4, 6)
    spec_text: str | None = None
    scalar_symbols: tuple = ("a",)
    restarts: int = 2
    max_iters: int = 120
    step_init: float = 0.5
    step_shrink: float = 0.5
    search_tol: float = 1e-4
    threads: int = 0

    def __post_init__(self):
        if self.kind not in KNOWN_KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.d < 2 or self.depth < 1 or self.dim < 1:
            raise ValueError("need d >= 2, depth >= 1, dim >= 1")
        if self.trials < 0:
            raise ValueError("trials must be >= 0")
        if self.tol_scale <= 0:
            raise ValueError("tolerance scale must be positive")
        self.dims = tuple(int(n) for n in self.dims)
        self.depths = tuple(int(n) for n in self.depths)
        self.scalar_symbols = tuple(self.scalar_symbols)

    def lattice(self) -> Lattice:
        return Lattice(self.d, self.depth)

    def search_params(self) -> SearchParams:
        return SearchParams(
            restarts=self.restarts,
            max_iters=self.max_iters,
            step_init=self.step_init,
            step_shrink=self.step_shrink,
            seed=self.seed,
            tol=self.search_tol,
        )


@dataclass
class CaseRecord:
    name: str
    value: float
    tolerance: float | None
    passed: bool
    direction: str = "le"  # 'le': value <= tol, 'ge': value >= tol, monitored if tol None


@dataclass
class ExperimentReport:
    kind: str
    config: dict
    cases: list
    rows: list
    max_residual: float | None
    pass_all: bool
    seed: int
    tool_version: str = _tool_version
    schema: int = SCHEMA_VERSION
    wall_time: float | None = None  # measured, never serialized


def _worker_count(config: ExperimentConfig) -> int:
    env = os.environ.get("PARALAB_THREADS", "").strip()
    threads = config.threads
    if env:
        try:
            threads = int(env)
        except ValueError as exc:
            raise ValueError(f"PARALAB_THREADS must be an integer, got {env!r}") from exc
    if threads <= 0:
        threads = min(os.cpu_count() or 1, 8)
    return max(threads, 1)


def _map_trials(config: ExperimentConfig, fn: Callable[[int], object]) -> list:
    """Evaluate fn(0..trials-1) with results in trial order."""
    indices = range(config.trials)
    workers = _worker_count(config)
    if workers == 1 or config.trials <= 1:
        return [fn(t) for t in indices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, indices))


# ---------------------------------------------------------------------------
# identity / norm suites
# ---------------------------------------------------------------------------


def _trial_instances(config: ExperimentConfig, t: int) -> dict:
    lattice = config.lattice()
    rng = generator(mix_seed(config.seed, t))
    m = config.dim
    inst = {
        "lattice": lattice,
        "rng_tail": rng,
        "a": random_step_function(lattice, 1, rng, mean_zero=True),
        "b": random_step_function(lattice, m, rng, mean_zero=True),
        "f": random_step_function(lattice, m, rng, mean_zero=False),
        "g": random_step_function(lattice, m, rng, mean_zero=False),
        "b_scalar": random_step_function(lattice, 1, rng, mean_zero=True),
        "lam": complex(rng.standard_normal() + 1j * rng.standard_normal()),
    }
    n_int = sum(lattice.d**n for n in range(lattice.N))
    shape = (n_int, lattice.d - 1, m, m)
    inst["aibi_a"] = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    inst["aibi_b"] = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    return inst


def _max_abs(f: sf.StepFunction) -> float:
    return float(np.max(np.abs(f.values)))


def _case_roundtrip(inst) -> float:
    f = inst["f"]
    back = sf.haar_synthesize(sf.haar_analyze(f))
    return _max_abs(back - f)


def _case_plancherel(inst) -> float:
    f = inst["f"]
    coeffs = sf.haar_analyze(f)
    total = float(np.sum(np.abs(coeffs.mean) ** 2))
    total += float(sum(np.sum(np.abs(arr) ** 2) for arr in coeffs.levels))
    return abs(sf.hs_inner(f, f).real - total)


def _case_tower(inst) -> float:
    f, lattice = inst["f"], inst["lattice"]
    worst = 0.0
    for n in range(lattice.N + 1):
        for m_level in range(lattice.N + 1):
            chained = sf.cond_expect(sf.cond_expect(f, n), m_level)
            direct = sf.cond_expect(f, min(n, m_level))
            worst = max(worst, _max_abs(chained - direct))
    return worst


def _case_telescoping(inst) -> float:
    f, lattice = inst["f"], inst["lattice"]
    total = sf.cond_expect(f, 0)
    for k in range(1, lattice.N + 1):
        total = total + sf.mart_diff(f, k)
    return _max_abs(total - f)


def _case_integral_preserved(inst) -> float:
    f, lattice = inst["f"], inst["lattice"]
    base = f.mean()
    worst = 0.0
    for n in range(lattice.N + 1):
        worst = max(worst, float(np.max(np.abs(sf.cond_expect(f, n).mean() - base))))
    return worst


def _case_module_boundary(inst) -> float:
    f, lattice = inst["f"], inst["lattice"]
    n = max(lattice.N - 1, 0)
    g = sf.cond_expect(inst["b_scalar"], n)  # scalar, constant on level-n intervals
    lhs = sf.cond_expect(sf.multiply(g, f), n)
    rhs = sf.multiply(g, sf.cond_expect(f, n))
    return _max_abs(lhs - rhs)


def _case_gram(inst) -> float:
    lattice = inst["lattice"]
    funcs = [sf.constant(lattice, np.array([[1.0]]))]
    for n in range(lattice.N):
        for k in range(lattice.d**n):
            for i in range(1, lattice.d):
                funcs.append(sf.haar_function(lattice, Interval(n, k), i))
    table = np.stack([h.values[:, 0, 0] for h in funcs])
    gram = lattice.atom_measure * (np.conj(table) @ table.T)
    return float(np.max(np.abs(gram - np.eye(len(funcs)))))


def _case_pi_two_forms(inst) -> float:
    b, f, lattice = inst["b"], inst["f"], inst["lattice"]
    direct = para.pi(b, f)
    coeffs_b = sf.haar_analyze(b)
    acc = np.zeros_like(f.values)
    for n in range(lattice.N):
        avg_f = sf.cond_expect(f, n).values
        for k in range(lattice.d**n):
            I = Interval(n, k)
            rng_atoms = lattice.atom_range(I)
            sl = slice(rng_atoms.start, rng_atoms.stop)
            mean_on_I = avg_f[rng_atoms.start]
            for i in range(1, lattice.d):
                h = sf.haar_function(lattice, I, i).values[sl, 0, 0]
                coef = coeffs_b.coefficient(I, i)
                acc[sl] += h[:, None, None] * (coef @ mean_on_I)
    return _max_abs(direct - sf.StepFunction(lattice, acc))


def _case_decomposition(inst) -> float:
    b, f = inst["b"], inst["f"]
    lhs = sf.multiply(b, f)
    rhs = para.pi(b, f) + para.lambda_op(b, f) + para.r_op(b, f)
    correction = sf.constant(f.lattice, b.mean() @ f.mean())
    return _max_abs(lhs - rhs - correction)


def _case_theta_sum(inst) -> float:
    b, f = inst["b"], inst["f"]
    return _max_abs(para.theta(b, f) - para.pi(b, f) - para.lambda_op(b, f))


def _case_adjoint_pairing(inst) -> float:
    b, f, g = inst["b"], inst["f"], inst["g"]
    return abs(sf.hs_inner(para.pi(b, f), g) - sf.hs_inner(f, para.pi_star(b, g)))


def _case_piarb(inst) -> float:
    a, b, f, lattice = inst["a"], inst["b"], inst["f"], inst["lattice"]
    commutator = para.Commutator(para.Pi(a), para.R(b))
    lhs = para.apply_operator(commutator, f)
    diffs_a = [sf.mart_diff(a, k) for k in range(1, lattice.N + 1)]
    diffs_b = [sf.mart_diff(b, k) for k in range(1, lattice.N + 1)]
    diffs_f = [sf.mart_diff(f, k) for k in range(1, lattice.N + 1)]
    acc = np.zeros_like(f.values)
    for k in range(1, lattice.N + 1):
        inner = np.zeros_like(f.values)
        for j in range(1, k):
            inner += sf.multiply(diffs_b[j - 1], diffs_f[j - 1]).values
        acc += sf.multiply_values(diffs_a[k - 1].values, inner)
    rhs = -acc - para.pi(a, para.pi(b, f)).values
    return _max_abs(lhs - sf.StepFunction(lattice, rhs))


def _case_piamb(inst) -> float:
    a, b, f = inst["a"], inst["b"], inst["f"]
    lhs = para.commutator_pi_mult(a, b, f)
    rhs = -1.0 * para.theta(b, para.pi(a, f)) + para.v_ab(a, b, f)
    return _max_abs(lhs - rhs)


def _case_w_closed(inst) -> float:
    a, f, g, lattice = inst["a"], inst["f"], inst["g"], inst["lattice"]
    w = para.w_afg(a, f, g)
    worst = 0.0
    for m_level in range(lattice.N + 1):
        direct = sf.cond_expect(w, m_level)
        closed = para.w_cond_closed(a, f, g, m_level)
        worst = max(worst, _max_abs(direct - closed))
    return worst


def _case_dk_expansion(inst) -> float:
    b, f, lattice = inst["b"], inst["f"], inst["lattice"]
    worst = 0.0
    for k in range(1, lattice.N + 1):
        expanded = para.dk_product_expansion(b, f, k)
        direct = sf.mart_diff(sf.multiply(sf.mart_diff(b, k), sf.mart_diff(f, k)), k)
        worst = max(worst, _max_abs(expanded - direct))
    return worst


def _case_assemble_adjoint(inst) -> float:
    b = inst["b"]
    left = para.assemble(para.PiStar(b))
    right = para.assemble(para.Pi(b)).conj().T
    return float(np.max(np.abs(left - right)))


def _case_apply_vs_assemble(inst) -> float:
    a, b, f, lattice = inst["a"], inst["b"], inst["f"], inst["lattice"]
    spec = para.Sum((para.Theta(b), para.Commutator(para.Pi(a), para.LeftMult(b))))
    matrix = para.assemble(spec, m=b.m)
    rng = inst["rng_tail"]
    worst = 0.0
    for _ in range(20):
        probe = sf.StepFunction(
            lattice,
            (rng.standard_normal(f.values.shape) + 1j * rng.standard_normal(f.values.shape)),
        )
        via_apply = para.apply_operator(spec, probe).values.reshape(-1)
        via_matrix = matrix @ probe.values.reshape(-1)
        worst = max(worst, float(np.max(np.abs(via_apply - via_matrix))))
    return worst


def _case_linearity(inst) -> float:
    b, f, g, lam = inst["b"], inst["f"], inst["g"], inst["lam"]
    worst = 0.0
    for leaf in (para.Pi(b), para.PiStar(b), para.Lambda(b), para.R(b), para.Theta(b), para.LeftMult(b)):
        lhs = para.apply_operator(leaf, lam * f + g)
        rhs = lam * para.apply_operator(leaf, f) + para.apply_operator(leaf, g)
        worst = max(worst, _max_abs(lhs - rhs))
    return worst


def _case_adjoint_remark(inst) -> float:
    a, b = inst["a"], inst["b"]
    left = para.assemble(para.Commutator(para.Adjoint(para.Pi(a)), para.LeftMult(b))).conj().T
    right = -para.assemble(para.Commutator(para.Pi(a), para.LeftMult(b.adjoint())))
    return float(np.max(np.abs(left - right)))


def _lambda_collapse_norm(config: ExperimentConfig) -> float:
    lattice = config.lattice()
    rng = generator(42)
    b = random_step_function(lattice, config.dim, rng, mean_zero=True)
    diff = para.assemble(para.Lambda(b)) - para.assemble(para.Adjoint(para.Pi(b.adjoint())))
    sv = ncmat.singular_values(diff)
    return float(sv[0])


def _case_regularity(inst) -> float:
    g, lattice = inst["g"], inst["lattice"]
    s_fn = norms.cond_square_fn(g).values
    big_s = norms.square_fn(g).values
    gap = lattice.d * np.matmul(s_fn, s_fn) - np.matmul(big_s, big_s)
    eigvals, _ = ncmat.herm_eig_batch(gap, vectors=False)
    return max(0.0, -float(eigvals.min()))


def _case_homogeneity(inst) -> float:
    b, f, lam, p = inst["b"], inst["f"], inst["lam"], 2.5
    worst = 0.0
    scaled = lam * b
    mag = abs(lam)
    worst = max(worst, abs(norms.bmo_M(scaled) - mag * norms.bmo_M(b)))
    worst = max(worst, abs(norms.bmo_so(scaled) - mag * norms.bmo_so(b)))
    worst = max(worst, abs(norms.bmo_cr(scaled) - mag * norms.bmo_cr(b)))
    worst = max(worst, abs(norms.lp_norm(lam * f, p) - mag * norms.lp_norm(f, p)))
    worst = max(worst, abs(norms.hpc_norm(lam * f, p) - mag * norms.hpc_norm(f, p)))
    worst = max(worst, abs(norms.h1max_norm(lam * f) - mag * norms.h1max_norm(f)))
    return worst


def _case_bmo_so_le_M(inst) -> float:
    b = inst["b"]
    return max(0.0, norms.bmo_so(b) - norms.bmo_M(b))


def _case_holder(inst) -> float:
    f, g = inst["f"], inst["g"]
    worst = 0.0
    for p in (1.0, 1.5, 2.0, 3.0, float("inf")):
        q = norms.conjugate_exponent(p)
        bound = norms.lp_norm(f, p) * norms.lp_norm(g, q)
        worst = max(worst, max(0.0, abs(sf.hs_inner(f, g)) - bound))
    return worst


def _scalar_sup_average_oracle(b: sf.StepFunction) -> float:
    """Classical sup-average oscillation for scalar functions, by loops."""
    lattice = b.lattice
    vals = b.values[:, 0, 0]
    worst = 0.0
    for n in range(lattice.N + 1):
        for k in range(lattice.d**n):
            rng_atoms = lattice.atom_range(Interval(n, k))
            chunk = vals[rng_atoms.start : rng_atoms.stop]
            avg = chunk.mean()
            worst = max(worst, float(np.mean(np.abs(chunk - avg) ** 2)))
    return float(np.sqrt(worst))


def _scalar_martingale_bmo_oracle(b: sf.StepFunction) -> float:
    """Classical martingale oscillation sup_m E_m|b - b_{m-1}|^2, by loops.

    On a level-m interval the conditioned square equals the average of
    |b - (parent-interval average)|^2 over that interval.
    """
    lattice = b.lattice
    vals = b.values[:, 0, 0]
    worst = 0.0
    for m_level in range(1, lattice.N + 1):
        for k in range(lattice.d**m_level):
            I = Interval(m_level, k)
            parent = lattice.parent(I)
            r_par = lattice.atom_range(parent)
            parent_avg = vals[r_par.start : r_par.stop].mean()
            r_own = lattice.atom_range(I)
            chunk = vals[r_own.start : r_own.stop]
            worst = max(worst, float(np.mean(np.abs(chunk - parent_avg) ** 2)))
    return float(np.sqrt(worst))


def _case_scalar_collapse(inst) -> float:
    b = inst["b_scalar"]
    sup_avg = _scalar_sup_average_oracle(b)
    worst = abs(norms.bmo_M(b) - sup_avg)
    worst = max(worst, abs(norms.bmo_so(b) - sup_avg))
    worst = max(worst, abs(norms.bmo_column(b) - _scalar_martingale_bmo_oracle(b)))
    return worst


def _case_aibi(inst) -> float:
    return max(0.0, -norms.aibi_defect(inst["aibi_a"], inst["aibi_b"]))


def _case_cond_square_closed(inst) -> float:
    b, f, lattice = inst["b"], inst["f"], inst["lattice"]
    pieces = [para.dk_product_expansion(b, f, k) for k in range(1, lattice.N + 1)]
    total = pieces[0]
    for piece in pieces[1:]:
        total = total + piece
    lhs = None
    for k in range(1, lattice.N + 1):
        dg = sf.mart_diff(total, k).values
        sq = np.conj(np.swapaxes(dg, -1, -2)) @ dg
        cond = sf.cond_expect_values(sq, lattice, k - 1)
        lhs = cond if lhs is None else lhs + cond
    cb = sf.haar_analyze(b)
    cf = sf.haar_analyze(f)
    rhs = np.zeros_like(lhs)
    d = lattice.d
    for n in range(lattice.N):
        for k in range(d**n):
            I = Interval(n, k)
            mu = lattice.measure_float(I)
            r_atoms = lattice.atom_range(I)
            for l in range(1, d):
                tot = np.zeros((total.m, total.m), dtype=np.complex128)
                for i in range(1, d):
                    j = ((l - i - 1) % d) + 1
                    if j == d:
                        continue
                    tot += cb.coefficient(I, i) @ cf.coefficient(I, j)
                rhs[r_atoms.start : r_atoms.stop] += (np.conj(tot.T) @ tot) / mu**2
    return float(np.max(np.abs(lhs - rhs)))


def _case_bmo_cr_ratio(inst) -> float:
    b = inst["b"]
    denom = norms.bmo_M(b)
    if denom < 1e-12:
        return float("nan")
    return norms.bmo_cr(b) / denom


def _case_maximal_tail(inst) -> float:
    return norms.maximal_tail_statistic(inst["a"], inst["f"], 2.0)


@dataclass
class _Case:
    name: str
    tolerance: float | None
    fn: Callable
    direction: str = "le"
    once: bool = False
    only_d: int | None = None  # restrict to d == value (2) or d != 2 (-2)


_SUITE_CASES = [
    _Case("stepfn.haar_gram_identity", 1e-10, _case_gram, once=True),
    _Case("stepfn.roundtrip", 1e-12, _case_roundtrip),
    _Case("stepfn.plancherel", 1e-10, _case_plancherel),
    _Case("stepfn.tower_property", 1e-12, _case_tower),
    _Case("stepfn.telescoping", 1e-12, _case_telescoping),
    _Case("stepfn.integral_preserved", 1e-12, _case_integral_preserved),
    _Case("stepfn.module_boundary", 1e-12, _case_module_boundary),
    _Case("paraproducts.pi_two_forms", 1e-11, _case_pi_two_forms),
    _Case("paraproducts.decomposition", 1e-11, _case_decomposition),
    _Case("paraproducts.theta_is_pi_plus_lambda", 1e-13, _case_theta_sum),
    _Case("paraproducts.adjoint_pairing", 1e-10, _case_adjoint_pairing),
    _Case("paraproducts.commutator_with_low_high", 1e-9, _case_piarb),
    _Case("paraproducts.commutator_closed_form", 1e-9, _case_piamb),
    _Case("paraproducts.w_conditional_closed_form", 1e-9, _case_w_closed),
    _Case("paraproducts.dk_product_expansion", 1e-11, _case_dk_expansion),
    _Case("paraproducts.assemble_adjoint", 1e-10, _case_assemble_adjoint, once=True),
    _Case("paraproducts.apply_vs_assemble", 1e-10, _case_apply_vs_assemble, once=True),
    _Case("paraproducts.leaf_linearity", 1e-10, _case_linearity),
    _Case("paraproducts.adjoint_commutator_remark", 1e-9, _case_adjoint_remark, once=True),
    _Case("norms.regularity_psd", 1e-10, _case_regularity),
    _Case("norms.homogeneity", 1e-10, _case_homogeneity),
    _Case("norms.bmo_so_le_bmo_M", 1e-10, _case_bmo_so_le_M),
    _Case("norms.holder_pairing", 1e-9, _case_holder),
    _Case("norms.scalar_bmo_collapse", 1e-10, _case_scalar_collapse),
    _Case("norms.aibi_psd", 1e-9, _case_aibi),
    _Case("norms.cond_square_closed_form", 1e-9, _case_cond_square_closed),
    _Case("norms.bmo_cr_over_bmo_M", None, _case_bmo_cr_ratio),
    _Case("norms.maximal_tail_statistic", None, _case_maximal_tail),
]


def _suite_cases(config: ExperimentConfig, prefixes: tuple[str, ...]) -> list[_Case]:
    out = [c for c in _SUITE_CASES if c.name.startswith(prefixes)]
    if "paraproducts." in prefixes:
        # the diagonal piece is exactly the paraproduct adjoint only for d=2;
        # for other d a fixed-seed symbol witnesses a genuinely nonzero gap
        if config.d == 2:
            out.append(
                _Case("paraproducts.lambda_adjoint_collapse", 1e-10,
                      lambda inst: _lambda_collapse_norm(config), once=True)
            )
        else:
            out.append(
                _Case("paraproducts.lambda_adjoint_genericity", 1e-6,
                      lambda inst: _lambda_collapse_norm(config),
                      once=True, direction="ge")
            )
    return out


def _run_suite(config: ExperimentConfig, prefixes: tuple[str, ...]) -> ExperimentReport:
    start = time.monotonic()
    cases: list[CaseRecord] = []
    if config.trials > 0:
        registry = _suite_cases(config, prefixes)

        def run_trial(t: int) -> dict:
            inst = _trial_instances(config, t)
            return {c.name: c.fn(inst) for c in registry if not c.once}

        per_trial = _map_trials(config, run_trial)
        once_inst = _trial_instances(config, 0)
        for case in registry:
            if case.once:
                value = case.fn(once_inst)
            else:
                samples = [trial[case.name] for trial in per_trial]
                finite = [s for s in samples if not np.isnan(s)]
                value = max(finite) if finite else float("nan")
            cases.append(_judge(case, value, config.tol_scale))
    return _finalize_report(config, cases, rows=[], started=start)


def _judge(case: _Case, value: float, tol_scale: float) -> CaseRecord:
    if case.tolerance is None:
        return CaseRecord(case.name, float(value), None, True, "monitored")
    if case.direction == "ge":
        threshold = case.tolerance / tol_scale
        return CaseRecord(case.name, float(value), case.tolerance, bool(value >= threshold), "ge")
    threshold = case.tolerance * tol_scale
    return CaseRecord(case.name, float(value), case.tolerance, bool(value <= threshold), "le")


def _finalize_report(config, cases, rows, started) -> ExperimentReport:
    residuals = [
        c.value for c in cases if c.tolerance is not None and c.direction == "le"
    ]
    report = ExperimentReport(
        kind=config.kind,
        config=_config_dict(config),
        cases=cases,
        rows=rows,
        max_residual=max(residuals) if residuals else None,
        pass_all=all(c.passed for c in cases),
        seed=config.seed,
        wall_time=time.monotonic() - started,
    )
    return report


def run_identity_suite(config: ExperimentConfig) -> ExperimentReport:
    """Worst residual per exact identity over seeded random instances."""
    return _run_suite(config, ("stepfn.", "paraproducts.", "norms."))


def run_norm_suite(config: ExperimentConfig) -> ExperimentReport:
    """Norm sanity checks and monitored statistics only."""
    return _run_suite(config, ("norms.",))


# ---------------------------------------------------------------------------
# scans
# ---------------------------------------------------------------------------


def _theta_ratio_rows(config: ExperimentConfig) -> list[dict]:
    lattice = config.lattice()
    p = config.p
    direction = "Lp_to_hpc" if p >= 2 else "hpc_to_Lp"
    ratios = []
    for t in range(config.trials):
        rng = generator(mix_seed(config.seed, t))
        b = random_step_function(lattice, config.dim, rng, mean_zero=True)
        f = random_step_function(lattice, config.dim, rng, mean_zero=False)
        image = para.theta(b, f)
        if p >= 2:
            denom = norms.bmo_M(b) * norms.lp_norm(f, p)
            num = norms.hpc_norm(image, p)
        else:
            denom = norms.bmo_M(b) * norms.hpc_norm(f, p)
            num = norms.lp_norm(image, p)
        if denom < 1e-12:
            continue
        ratios.append(num / denom)
    if not ratios:
        raise RuntimeError(f"all {config.trials} trials degenerate")
    arr = np.array(ratios)
    return [
        {
            "depth": config.depth,
            "p": p,
            "direction": direction,
            "sup_ratio": float(arr.max()),
            "q50": float(np.quantile(arr, 0.5, method="linear")),
            "q90": float(np.quantile(arr, 0.9, method="linear")),
            "trials": config.trials,
            "seed": config.seed,
        }
    ]


def run_scan(config: ExperimentConfig) -> ExperimentReport:
    """Dispatch to the requested scan and wrap its rows in a report."""
    start = time.monotonic()
    if config.kind == "katz":
        rows = katz_scan(list(config.dims), config.lattice(), config.search_params())
    elif config.kind == "commutator-scan":
        rows = commutator_ratio_scan(
            config.p, list(config.depths), config.trials,
            config.search_params(), d=config.d, m=config.dim,
        )
    elif config.kind == "theta-scan":
        rows = _theta_ratio_rows(config)
    else:
        raise ValueError(f"{config.kind!r} is not a scan kind")
    return _finalize_report(config, cases=[], rows=rows, started=start)


def run_opnorm(config: ExperimentConfig) -> ExperimentReport:
    """Ad-hoc operator evaluation from the text form with seeded symbols."""
    start = time.monotonic()
    if not config.spec_text:
        raise ValueError("opnorm runs need an operator expression")
    symbols = _SeededSymbols(config)
    spec = para.parse_operator(config.spec_text, symbols)
    lattice = config.lattice()
    result = l2_opnorm_result(spec, lattice=lattice, m=config.dim)
    rows = [
        {
            "quantity": "l2_opnorm",
            "value": result.value,
            "iterations": result.iterations,
            "converged": result.converged,
            "spec": config.spec_text,
            "symbols": sorted(symbols.drawn),
        }
    ]
    if config.p != 2.0:
        witness = lp_opnorm_lower(
            spec, config.p, config.search_params(), lattice=lattice, m=config.dim
        )
        rows.append(
            {
                "quantity": "lp_opnorm_lower",
                "value": witness.ratio,
                "p": config.p,
                "evaluations": witness.evaluations,
                "spec": config.spec_text,
            }
        )
    return _finalize_report(config, cases=[], rows=rows, started=start)


class _SeededSymbols(dict):
    """Symbol table that draws deterministic instances on first lookup."""

    def __init__(self, config: ExperimentConfig):
        super().__init__()
        self.config = config
        self.drawn: set[str] = set()

    def __contains__(self, name) -> bool:  # parser probes membership
        return isinstance(name, str) and name.isidentifier()

    def __getitem__(self, name: str) -> sf.StepFunction:
        if name not in self.keys():
            config = self.config
            digest = int.from_bytes(name.encode("utf-8").ljust(8, b"\0")[:8], "little")
            rng = generator(mix_seed(config.seed, digest))
            m = 1 if name in config.scalar_symbols else config.dim
            value = random_step_function(config.lattice(), m, rng, mean_zero=True)
            super().__setitem__(name, value)
            self.drawn.add(name)
        return super().__getitem__(name)


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    if config.kind == "identities":
        return run_identity_suite(config)
    if config.kind == "norms":
        return run_norm_suite(config)
    if config.kind == "opnorm":
        return run_opnorm(config)
    return run_scan(config)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _config_dict(config: ExperimentConfig) -> dict:
    data = asdict(config)
    data["dims"] = list(config.dims)
    data["depths"] = list(config.depths)
    data["scalar_symbols"] = list(config.scalar_symbols)
    return data


def report_to_dict(report: ExperimentReport) -> dict:
    return {
        "schema": report.schema,
        "tool_version": report.tool_version,
        "kind": report.kind,
        "seed": report.seed,
        "config": report.config,
        "cases": [
            {
                "name": c.name,
                "value": c.value,
                "tolerance": c.tolerance,
                "direction": c.direction,
                "pass": c.passed,
            }
            for c in report.cases
        ],
        "rows": report.rows,
        "aggregate": {
            "max_residual": report.max_residual,
            "pass_all": report.pass_all,
            "wall_time": None,  # kept null so reruns are byte-identical
        },
    }


def report_from_dict(data: dict) -> ExperimentReport:
    cases = [
        CaseRecord(
            name=c["name"],
            value=c["value"],
            tolerance=c["tolerance"],
            passed=c["pass"],
            direction=c["direction"],
        )
        for c in data["cases"]
    ]
    config = data["config"]
    return ExperimentReport(
        kind=data["kind"],
        config=config,
        cases=cases,
        rows=data["rows"],
        max_residual=data["aggregate"]["max_residual"],
        pass_all=data["aggregate"]["pass_all"],
        seed=data["seed"],
        tool_version=data["tool_version"],
        schema=data["schema"],
        wall_time=data["aggregate"]["wall_time"],
    )


def report_json(report: ExperimentReport) -> str:
    return json.dumps(report_to_dict(report), indent=2) + "\n"


def rows_csv(kind: str, rows: list[dict]) -> str:
    columns = CSV_COLUMNS.get(kind)
    if columns is None:
        raise ValueError(f"no CSV table defined for kind {kind!r}")
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_csv_cell(row[c]) for c in columns))
    return "\n".join(lines) + "\n"


def _csv_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_atomic(path: str, content: str):
    """Write via a temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(content)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def write_report(report: ExperimentReport, path: str, fmt: str):
    if fmt == "json":
        write_atomic(path, report_json(report))
    elif fmt == "csv":
        write_atomic(path, rows_csv(report.kind, report.rows))
    else:
        raise ValueError(f"unknown output format {fmt!r}")
