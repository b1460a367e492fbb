"""Norms and square functions on matrix-valued step functions.

Covers the integrated Schatten norms L_p, three flavors of operator-valued
oscillation norm (norm-valued, strong-operator, and column/row), the
martingale square function and its conditional variant, the column Hardy
norm built from the latter, and the maximal-function norm.

Oscillation sups run over every interval of the finite lattice including
the root; the column variant's conditioning level runs 1..N (level 0 has
no martingale difference).
"""

from __future__ import annotations

import numpy as np

from . import ncmat
from .lattice import Lattice
from .stepfn import StepFunction, level_averages


def conjugate_exponent(p: float) -> float:
    """p' with 1/p + 1/p' = 1; handles the endpoints 1 and inf."""
    if not (p >= 1.0):
        raise ValueError(f"exponent must be >= 1, got {p}")
    if p == 1.0:
        return float("inf")
    if np.isinf(p):
        return 1.0
    return p / (p - 1.0)


def _check_p(p: float, allow_inf: bool = True):
    if not (p >= 1.0):
        raise ValueError(f"exponent must be >= 1, got {p}")
    if np.isinf(p) and not allow_inf:
        raise ValueError("exponent must be finite here")


def lp_norm(f: StepFunction, p: float) -> float:
    """Integrated Schatten norm: (integral of trace|f|^p)^(1/p); max spectral norm at p = inf."""
    _check_p(p)
    sv = ncmat.singular_values(f.values)
    if np.isinf(p):
        return float(sv[..., 0].max()) if sv.size else 0.0
    total = f.lattice.atom_measure * float(np.sum(sv**p))
    return total ** (1.0 / p)


def _interval_means(values: np.ndarray, lattice: Lattice, n: int) -> np.ndarray:
    d, N = lattice.d, lattice.N
    m = values.shape[-1]
    return values.reshape(d**n, d ** (N - n), m, m).mean(axis=1)


def _spread(per_interval: np.ndarray, lattice: Lattice, n: int) -> np.ndarray:
    return np.repeat(per_interval, lattice.d ** (lattice.N - n), axis=0)


def bmo_M(b: StepFunction) -> float:
    """Largest interval-averaged squared spectral-norm oscillation, square-rooted."""
    lattice = b.lattice
    devs = []
    for n in range(lattice.N + 1):
        avg = _spread(_interval_means(b.values, lattice, n), lattice, n)
        devs.append(b.values - avg)
    sq = ncmat.spectral_norm_batch(np.concatenate(devs)) ** 2
    worst = 0.0
    for n in range(lattice.N + 1):
        level_sq = sq[n * lattice.n_atoms : (n + 1) * lattice.n_atoms]
        per_interval = level_sq.reshape(lattice.d**n, -1).mean(axis=1)
        worst = max(worst, float(per_interval.max()))
    return float(np.sqrt(worst))


def bmo_so(b: StepFunction) -> float:
    """Strong-operator oscillation: sup over unit vectors taken exactly.

    For each interval the sup over unit vectors of the averaged squared
    deviation applied to the vector is the top eigenvalue of the averaged
    Gram matrix of the deviation.
    """
    lattice = b.lattice
    per_interval = []
    for n in range(lattice.N + 1):
        avg = _spread(_interval_means(b.values, lattice, n), lattice, n)
        dev = b.values - avg
        gram = np.conj(np.swapaxes(dev, -1, -2)) @ dev
        per_interval.append(_interval_means(gram, lattice, n))
    eigvals, _ = ncmat.herm_eig_batch(np.concatenate(per_interval), vectors=False)
    return float(np.sqrt(max(float(eigvals[..., 0].max()), 0.0)))


def _diff_squares(b: StepFunction) -> list[np.ndarray]:
    """|d_k b|^2 = (d_k b)* (d_k b) for k = 1..N, each shaped (atoms, m, m)."""
    avgs = level_averages(b.values, b.lattice)
    out = []
    for k in range(1, b.lattice.N + 1):
        diff = avgs[k] - avgs[k - 1]
        out.append(np.conj(np.swapaxes(diff, -1, -2)) @ diff)
    return out


def bmo_column(b: StepFunction) -> float:
    """sup over conditioning levels of the conditioned tail sum of |d_k b|^2."""
    lattice = b.lattice
    squares = _diff_squares(b)
    tail = None
    tails = [None] * (lattice.N + 1)
    for k in range(lattice.N, 0, -1):
        tail = squares[k - 1] if tail is None else tail + squares[k - 1]
        tails[k] = tail
    conditioned = [
        _interval_means(tails[m_level], lattice, m_level)
        for m_level in range(1, lattice.N + 1)
    ]
    eigvals, _ = ncmat.herm_eig_batch(np.concatenate(conditioned), vectors=False)
    return float(np.sqrt(max(float(eigvals[..., 0].max()), 0.0)))


def bmo_row(b: StepFunction) -> float:
    return bmo_column(b.adjoint())


def bmo_cr(b: StepFunction) -> float:
    return max(bmo_column(b), bmo_row(b))


def square_fn(g: StepFunction) -> StepFunction:
    """Martingale square function: PSD root of the sum of |d_k g|^2."""
    total = sum(_diff_squares(g))
    if isinstance(total, int):  # N = 0 cannot happen; guard for empty sum
        raise ValueError("lattice has no difference levels")
    return g.with_values(ncmat.psd_power_batch(total, 0.5))


def cond_square_fn(g: StepFunction) -> StepFunction:
    """Conditional square function: root of the sum of E_{k-1}|d_k g|^2."""
    lattice = g.lattice
    total = None
    for k, sq in enumerate(_diff_squares(g), start=1):
        cond = _spread(_interval_means(sq, lattice, k - 1), lattice, k - 1)
        total = cond if total is None else total + cond
    return g.with_values(ncmat.psd_power_batch(total, 0.5))


def hpc_norm(g: StepFunction, p: float) -> float:
    """Column Hardy norm: L_p norm of the conditional square function."""
    _check_p(p, allow_inf=False)
    return lp_norm(cond_square_fn(g), p)


def h1max_norm(g: StepFunction) -> float:
    """Integral of the running maximum of trace norms of the averages E_m g."""
    avgs = np.stack(level_averages(g.values, g.lattice))  # (N+1, atoms, m, m)
    traces = ncmat.trace_norm_batch(avgs)  # (N+1, atoms)
    return float(g.lattice.atom_measure * np.sum(traces.max(axis=0)))


def maximal_tail_statistic(a: StepFunction, f: StepFunction, p: float) -> float:
    """Monitored ratio: maximal conditioned high-frequency product vs BMO(a)·||f||_p.

    Numerator is the L_p norm of x -> max over m of the trace norm of
    E_m(sum over j > m of d_j(a)·d_j(f)) at x; the denominator is
    bmo_M(a) times lp_norm(f, p).  Returns nan when degenerate.
    """
    _check_p(p, allow_inf=False)
    if not a.is_scalar:
        raise ValueError("the maximal-tail statistic takes a scalar symbol")
    lattice = f.lattice
    avgs_a = level_averages(a.values, lattice)
    avgs_f = level_averages(f.values, lattice)
    prods = []
    for j in range(1, lattice.N + 1):
        da = avgs_a[j] - avgs_a[j - 1]
        df = avgs_f[j] - avgs_f[j - 1]
        prods.append(da[..., 0, 0][..., None, None] * df)
    per_level = []
    for m_level in range(lattice.N + 1):
        tail = None
        for j in range(m_level + 1, lattice.N + 1):
            tail = prods[j - 1] if tail is None else tail + prods[j - 1]
        if tail is None:
            tail = np.zeros_like(f.values)
        cond = _spread(_interval_means(tail, lattice, m_level), lattice, m_level)
        per_level.append(ncmat.trace_norm_batch(cond))
    pointwise_max = np.stack(per_level).max(axis=0)  # (atoms,)
    numerator = float(
        (lattice.atom_measure * np.sum(pointwise_max**p)) ** (1.0 / p)
    )
    denominator = bmo_M(a) * lp_norm(f, p)
    if denominator < 1e-12:
        return float("nan")
    return numerator / denominator


def aibi_defect(a_families: np.ndarray, b_families: np.ndarray) -> float:
    """Smallest eigenvalue of the domination gap for coefficient families.

    Both inputs have shape (intervals, slots, m, m).  Returns the minimum
    eigenvalue of (sup_I sum_i ||a_{I,i}||^2) * sum_{J,j} b*b  minus
    sum_I |sum_i a_{I,i} b_{I,i}|^2, which is nonnegative up to roundoff.
    """
    a_families = np.asarray(a_families, dtype=np.complex128)
    b_families = np.asarray(b_families, dtype=np.complex128)
    if a_families.shape != b_families.shape:
        raise ValueError("coefficient families must share a shape")
    inner = np.einsum("ispq,isqr->ipr", a_families, b_families)
    lhs = np.einsum("iqp,iqr->pr", np.conj(inner), inner)
    sup = float((ncmat.spectral_norm_batch(a_families) ** 2).sum(axis=1).max())
    gram = np.einsum("isqp,isqr->pr", np.conj(b_families), b_families)
    return ncmat.psd_min_eig(sup * gram - lhs)
