"""Finite d-adic interval system on [0, 1).

The unit interval is split recursively into d equal parts down to a fixed
depth N.  Level n holds d^n intervals of measure d^(-n); the level-N
intervals are the atoms on which step functions live.  Intervals are
identified by (level, index) pairs so all combinatorics stay exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, NamedTuple

_MAX_ATOMS = 2**63 - 1


class Interval(NamedTuple):
    """Interval I_{n,k}: the k-th interval of length d^(-n) at level n."""

    n: int
    k: int


@dataclass(frozen=True)
class Lattice:
    """Branching factor d and depth N; validated on construction."""

    d: int
    N: int

    def __post_init__(self):
        if self.d < 2:
            raise ValueError(f"branching factor must be >= 2, got {self.d}")
        if self.N < 1:
            raise ValueError(f"depth must be >= 1, got {self.N}")
        if self.d**self.N > _MAX_ATOMS:
            raise ValueError(f"d^N = {self.d}^{self.N} overflows 64-bit atom indexing")

    @property
    def n_atoms(self) -> int:
        return self.d**self.N

    def level_size(self, n: int) -> int:
        self._check_level(n)
        return self.d**n

    def intervals(self, n: int) -> Iterator[Interval]:
        """All intervals at level n, in index order."""
        self._check_level(n)
        return (Interval(n, k) for k in range(self.d**n))

    def all_intervals(self) -> Iterator[Interval]:
        """Every interval, level 0 through N, coarse to fine."""
        for n in range(self.N + 1):
            yield from self.intervals(n)

    def children(self, I: Interval) -> list[Interval]:
        self._check_interval(I)
        if I.n >= self.N:
            raise ValueError(f"level-{I.n} interval has no children at depth {self.N}")
        return [Interval(I.n + 1, I.k * self.d + j) for j in range(self.d)]

    def parent(self, I: Interval) -> Interval:
        self._check_interval(I)
        if I.n < 1:
            raise ValueError("root interval has no parent")
        return Interval(I.n - 1, I.k // self.d)

    def atom_range(self, I: Interval) -> range:
        """Half-open range of atom indices covered by I."""
        self._check_interval(I)
        width = self.d ** (self.N - I.n)
        return range(I.k * width, (I.k + 1) * width)

    def measure(self, I: Interval) -> Fraction:
        """Exact measure d^(-n)."""
        self._check_interval(I)
        return Fraction(1, self.d**I.n)

    def measure_float(self, I: Interval) -> float:
        self._check_interval(I)
        return float(self.d) ** (-I.n)

    @property
    def atom_measure(self) -> float:
        return float(self.d) ** (-self.N)

    def _check_level(self, n: int):
        if not 0 <= n <= self.N:
            raise ValueError(f"level {n} outside [0, {self.N}]")

    def _check_interval(self, I: Interval):
        self._check_level(I.n)
        if not 0 <= I.k < self.d**I.n:
            raise ValueError(f"index {I.k} outside [0, {self.d**I.n}) at level {I.n}")


def build_lattice(d: int, N: int) -> Lattice:
    """Construct the depth-N d-adic lattice on [0, 1)."""
    return Lattice(d, N)
