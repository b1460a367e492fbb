"""Matrix-valued step functions on the atoms of a d-adic lattice.

A step function stores one m x m complex matrix per depth-N atom.  The
module provides the pointwise (noncommutative) algebra, conditional
expectations onto coarser levels, martingale differences, and analysis /
synthesis against the generalized Haar system built from d-th roots of
unity.

Finite-depth convention: a function on [0, 1) decomposes as its level-0
mean plus wavelet terms over levels 0..N-1.  Every reconstruction in this
package is "mean + wavelet sum"; the mean carries what an infinite-depth
lattice would push to coarser and coarser scales.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import Interval, Lattice


def root_of_unity_power(d: int, exponent: int) -> complex:
    """exp(2*pi*i*exponent/d), with the exponent reduced mod d first."""
    e = exponent % d
    angle = 2.0 * math.pi * e / d
    return complex(math.cos(angle), math.sin(angle))


def _check_values(lattice: Lattice, values: np.ndarray) -> np.ndarray:
    values = np.ascontiguousarray(values, dtype=np.complex128)
    if values.ndim != 3 or values.shape[1] != values.shape[2]:
        raise ValueError(f"values must have shape (atoms, m, m), got {values.shape}")
    if values.shape[0] != lattice.n_atoms:
        raise ValueError(
            f"expected {lattice.n_atoms} atom values, got {values.shape[0]}"
        )
    if not np.all(np.isfinite(values)):
        raise ValueError("step function values must be finite")
    return values


@dataclass(frozen=True)
class StepFunction:
    """Function constant on depth-N atoms with m x m matrix values."""

    lattice: Lattice
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _check_values(self.lattice, self.values))

    @property
    def m(self) -> int:
        return self.values.shape[-1]

    @property
    def is_scalar(self) -> bool:
        return self.m == 1

    def with_values(self, values: np.ndarray) -> "StepFunction":
        return StepFunction(self.lattice, values)

    def __add__(self, other: "StepFunction") -> "StepFunction":
        _check_same_shape(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "StepFunction") -> "StepFunction":
        _check_same_shape(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, other: "StepFunction") -> "StepFunction":
        return multiply(self, other)

    def __rmul__(self, scalar: complex) -> "StepFunction":
        return scale(self, scalar)

    def __neg__(self) -> "StepFunction":
        return self.with_values(-self.values)

    def adjoint(self) -> "StepFunction":
        return pointwise_adjoint(self)

    def mean(self) -> np.ndarray:
        """E_0 f as a matrix (the integral over [0, 1))."""
        return self.values.mean(axis=0)

    def mean_zero(self) -> "StepFunction":
        """Subtract the level-0 mean."""
        return self.with_values(self.values - self.mean())

    def to_record(self) -> dict:
        """Flat serialization: {d, N, m, atoms: [[re, im], ...]}."""
        flat = self.values.reshape(-1)
        return {
            "d": self.lattice.d,
            "N": self.lattice.N,
            "m": self.m,
            "atoms": [[float(z.real), float(z.imag)] for z in flat],
        }


def from_record(record: dict) -> StepFunction:
    lattice = Lattice(record["d"], record["N"])
    m = record["m"]
    flat = np.array([complex(re, im) for re, im in record["atoms"]])
    return StepFunction(lattice, flat.reshape(lattice.n_atoms, m, m))


def constant(lattice: Lattice, value: np.ndarray) -> StepFunction:
    value = np.atleast_2d(np.asarray(value, dtype=np.complex128))
    values = np.broadcast_to(value, (lattice.n_atoms,) + value.shape).copy()
    return StepFunction(lattice, values)


def _check_same_lattice(f: StepFunction, g: StepFunction):
    if f.lattice != g.lattice:
        raise ValueError(f"lattice mismatch: {f.lattice} vs {g.lattice}")


def _check_same_shape(f: StepFunction, g: StepFunction):
    _check_same_lattice(f, g)
    if f.m != g.m:
        raise ValueError(f"matrix dimension mismatch: {f.m} vs {g.m}")


# ---------------------------------------------------------------------------
# pointwise algebra (array cores accept leading batch dimensions)
# ---------------------------------------------------------------------------


def multiply_values(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Atomwise matrix product a(t) @ b(t); an m=1 operand acts as a scalar."""
    ma, mb = a.shape[-1], b.shape[-1]
    if ma == mb:
        return np.matmul(a, b)
    if ma == 1:
        return a[..., 0, 0][..., None, None] * b
    if mb == 1:
        return a * b[..., 0, 0][..., None, None]
    raise ValueError(f"matrix dimension mismatch: {ma} vs {mb}")


def multiply(f: StepFunction, g: StepFunction) -> StepFunction:
    """Pointwise product f·g in the written (noncommutative) order."""
    _check_same_lattice(f, g)
    return StepFunction(f.lattice, multiply_values(f.values, g.values))


def add(f: StepFunction, g: StepFunction) -> StepFunction:
    return f + g


def scale(f: StepFunction, scalar: complex) -> StepFunction:
    return f.with_values(complex(scalar) * f.values)


def pointwise_adjoint(f: StepFunction) -> StepFunction:
    """Atomwise conjugate transpose."""
    return f.with_values(np.conj(np.swapaxes(f.values, -1, -2)))


# ---------------------------------------------------------------------------
# conditional expectations and martingale differences
# ---------------------------------------------------------------------------


def cond_expect_values(values: np.ndarray, lattice: Lattice, n: int) -> np.ndarray:
    """Average over level-n intervals, broadcast back onto atoms."""
    if not 0 <= n <= lattice.N:
        raise ValueError(f"level {n} outside [0, {lattice.N}]")
    if n == lattice.N:
        return values.copy()
    lead = values.shape[:-3]
    m = values.shape[-1]
    block = lattice.d ** (lattice.N - n)
    grouped = values.reshape(lead + (lattice.d**n, block, m, m))
    means = grouped.mean(axis=-3)
    out = np.repeat(means, block, axis=-3)
    return out.reshape(values.shape)


def cond_expect(f: StepFunction, n: int) -> StepFunction:
    """E_n f: constant on each level-n interval with the interval average."""
    return f.with_values(cond_expect_values(f.values, f.lattice, n))


def mart_diff_values(values: np.ndarray, lattice: Lattice, n: int) -> np.ndarray:
    if not 1 <= n <= lattice.N:
        raise ValueError(f"difference level {n} outside [1, {lattice.N}]")
    return cond_expect_values(values, lattice, n) - cond_expect_values(
        values, lattice, n - 1
    )


def mart_diff(f: StepFunction, n: int) -> StepFunction:
    """d_n f = E_n f - E_{n-1} f."""
    return f.with_values(mart_diff_values(f.values, f.lattice, n))


def level_averages(values: np.ndarray, lattice: Lattice) -> list[np.ndarray]:
    """[E_0 f, ..., E_N f] computed by successive coarsening (one pass)."""
    d, N = lattice.d, lattice.N
    lead = values.shape[:-3]
    m = values.shape[-1]
    out: list[np.ndarray] = [None] * (N + 1)  # type: ignore[list-item]
    out[N] = values
    current = values
    for n in range(N - 1, -1, -1):
        grouped = current.reshape(lead + (d**n, d, m, m))
        current = grouped.mean(axis=-3)
        out[n] = np.repeat(current, d ** (N - n), axis=-3).reshape(values.shape)
        current = current.reshape(lead + (d**n, m, m))
    return out


# ---------------------------------------------------------------------------
# pairings
# ---------------------------------------------------------------------------


def pair_scalar(g: StepFunction, f: StepFunction) -> np.ndarray:
    """<g, f> = integral of conj(g)·f: a matrix in M_m."""
    _check_same_lattice(g, f)
    if not g.is_scalar:
        raise ValueError("pairing weight must be scalar-valued (m = 1)")
    weights = np.conj(g.values[:, 0, 0])
    return g.lattice.atom_measure * np.einsum("a,apq->pq", weights, f.values)


def hs_inner(f: StepFunction, g: StepFunction) -> complex:
    """Integral of trace(f(t)* g(t)): the Hilbert-Schmidt-valued L_2 pairing."""
    _check_same_shape(f, g)
    return complex(f.lattice.atom_measure * np.vdot(f.values, g.values))


def l2_norm(f: StepFunction) -> float:
    return math.sqrt(max(hs_inner(f, f).real, 0.0))


# ---------------------------------------------------------------------------
# Haar system
# ---------------------------------------------------------------------------


def haar_function(lattice: Lattice, I: Interval, i: int) -> StepFunction:
    """Generalized Haar function h_I^i as a scalar step function.

    For 1 <= i <= d-1 the function oscillates through the d-th roots of
    unity over the children of I (value d^(n/2)·w^(i(j+1)) on child j)
    and has zero mean and unit L_2 norm.  h_I^0 is d^(n/2) on I.
    """
    d = lattice.d
    lattice._check_interval(I)
    if not 0 <= i <= d - 1:
        raise ValueError(f"Haar index {i} outside [0, {d - 1}]")
    if i >= 1 and I.n > lattice.N - 1:
        raise ValueError(f"oscillating Haar function needs level <= {lattice.N - 1}")
    values = np.zeros((lattice.n_atoms, 1, 1), dtype=np.complex128)
    amp = float(d) ** (I.n / 2.0)
    if i == 0:
        rng = lattice.atom_range(I)
        values[rng.start : rng.stop] = amp
    else:
        for j, child in enumerate(lattice.children(I)):
            rng = lattice.atom_range(child)
            values[rng.start : rng.stop] = amp * root_of_unity_power(d, i * (j + 1))
    return StepFunction(lattice, values)


@dataclass(frozen=True)
class HaarCoefficients:
    """Complete coefficient table <h_I^i, f> plus the level-0 mean.

    ``levels[n]`` has shape (d^n, d-1, m, m): entry [k, i-1] is the
    coefficient at interval (n, k) and oscillation index i.
    """

    lattice: Lattice
    mean: np.ndarray
    levels: tuple

    def __post_init__(self):
        d, N = self.lattice.d, self.lattice.N
        if len(self.levels) != N:
            raise ValueError(f"expected {N} coefficient levels, got {len(self.levels)}")
        m = self.mean.shape[-1]
        for n, arr in enumerate(self.levels):
            if arr.shape != (d**n, d - 1, m, m):
                raise ValueError(
                    f"level {n} coefficients have shape {arr.shape}, "
                    f"expected {(d**n, d - 1, m, m)}"
                )

    @property
    def m(self) -> int:
        return self.mean.shape[-1]

    def coefficient(self, I: Interval, i: int) -> np.ndarray:
        if not 1 <= i <= self.lattice.d - 1:
            raise ValueError(f"oscillation index {i} outside [1, {self.lattice.d - 1}]")
        if not 0 <= I.n <= self.lattice.N - 1:
            raise ValueError(f"coefficient level {I.n} outside [0, {self.lattice.N - 1}]")
        return self.levels[I.n][I.k, i - 1]


def _analysis_weights(d: int) -> np.ndarray:
    """W[i-1, j] = conj(w^(i(j+1))) for i = 1..d-1, j = 0..d-1."""
    W = np.empty((d - 1, d), dtype=np.complex128)
    for i in range(1, d):
        for j in range(d):
            W[i - 1, j] = np.conj(root_of_unity_power(d, i * (j + 1)))
    return W


def haar_analyze(f: StepFunction) -> HaarCoefficients:
    """All wavelet coefficients of f, level by level, plus the mean."""
    lattice, v = f.lattice, f.values
    d, N, m = lattice.d, lattice.N, f.m
    W = _analysis_weights(d)
    levels = []
    averages = v
    # walk from the finest level up, keeping block averages as we go
    stack = [v]
    for n in range(N - 1, -1, -1):
        averages = averages.reshape(d**n, d, m, m).mean(axis=1)
        stack.append(averages)
    stack.reverse()  # stack[n] = level-n interval averages, shape (d^n, m, m)
    for n in range(N):
        child_avgs = stack[n + 1].reshape(d**n, d, m, m)
        amp = float(d) ** (n / 2.0) * float(d) ** (-(n + 1))
        coeffs = amp * np.einsum("ij,kjpq->kipq", W, child_avgs)
        levels.append(coeffs)
    return HaarCoefficients(lattice, stack[0][0].copy(), tuple(levels))


def haar_synthesize(coeffs: HaarCoefficients) -> StepFunction:
    """Rebuild the step function: mean plus all wavelet contributions."""
    lattice = coeffs.lattice
    d, N, m = lattice.d, lattice.N, coeffs.m
    Wsyn = np.conj(_analysis_weights(d)).T  # [j, i-1] = w^(i(j+1))
    values = np.broadcast_to(coeffs.mean, (lattice.n_atoms, m, m)).copy()
    for n in range(N):
        amp = float(d) ** (n / 2.0)
        piece = amp * np.einsum("ji,kipq->kjpq", Wsyn, coeffs.levels[n])
        piece = piece.reshape(d ** (n + 1), m, m)
        values += np.repeat(piece, d ** (N - n - 1), axis=0)
    return StepFunction(lattice, values)
