"""Deterministic seed derivation and random generator construction.

Reproducibility contract: every stochastic operation in this package draws
from a ``numpy.random.Generator`` backed by the PCG64 bit generator, and all
seeds are derived from a single 64-bit master seed with the SplitMix64
finalizer. Batch items mix their position into the master seed, so results
never depend on scheduling or worker count and are identical across runs.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One SplitMix64 step: advance by the golden gamma, then finalize."""
    x = (x + _GOLDEN) & _MASK64
    z = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, *path: int) -> int:
    """Mix a master seed and an index path into an independent 64-bit seed."""
    h = splitmix64(master & _MASK64)
    for part in path:
        h = splitmix64(h ^ (int(part) & _MASK64))
    return h


def generator(master: int, *path: int) -> np.random.Generator:
    """PCG64 generator seeded with ``derive_seed(master, *path)``."""
    return np.random.Generator(np.random.PCG64(derive_seed(master, *path)))
