"""Deterministic seeding: counter-based generators with golden-ratio mixing.

Trial t of a run seeded with ``base`` uses ``mix_seed(base, t)``; nested
streams mix again.  Generators are Philox (counter-based), so results do
not depend on how work is split across workers.
"""

from __future__ import annotations

import numpy as np

GOLDEN_RATIO_64 = 0x9E3779B97F4A7C15
_MASK_64 = 0xFFFFFFFFFFFFFFFF


def mix_seed(base: int, index: int) -> int:
    """base XOR (index times the 64-bit golden ratio constant), mod 2^64."""
    return (int(base) ^ ((int(index) * GOLDEN_RATIO_64) & _MASK_64)) & _MASK_64


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed & _MASK_64))
