"""Random step-function instances for experiments and scans.

The instance law: every Haar coefficient is an independent standard
complex Gaussian matrix; the mean is either zero (symbols) or drawn the
same way (test functions).  Symbols can be normalized to unit bmo_M.
"""

from __future__ import annotations

import numpy as np

from .lattice import Lattice
from .norms import bmo_M
from .stepfn import HaarCoefficients, StepFunction, haar_synthesize


def _complex_gauss(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_step_function(
    lattice: Lattice,
    m: int,
    rng: np.random.Generator,
    mean_zero: bool = True,
    normalize: str | None = None,
) -> StepFunction:
    """Draw a step function from the Gaussian Haar-coefficient law.

    ``normalize='bmo_M'`` rescales to unit norm-valued oscillation
    (degenerate draws below 1e-12 are returned unscaled).
    """
    d, N = lattice.d, lattice.N
    levels = tuple(
        _complex_gauss(rng, (d**n, d - 1, m, m)) for n in range(N)
    )
    mean = np.zeros((m, m), dtype=np.complex128)
    if not mean_zero:
        mean = _complex_gauss(rng, (m, m))
    f = haar_synthesize(HaarCoefficients(lattice, mean, levels))
    if normalize == "bmo_M":
        norm = bmo_M(f)
        if norm > 1e-12:
            f = (1.0 / norm) * f
    elif normalize is not None:
        raise ValueError(f"unknown normalization {normalize!r}")
    return f
