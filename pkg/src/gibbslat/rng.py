"""Seed derivation for independent replicate streams."""

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(z: int) -> int:
    """The splitmix64 finaliser, a bijection on 64-bit integers."""
    z = (z + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def child_seed(seed: int, k: int) -> int:
    """Seed of replicate ``k``.

    ``seed + k * golden`` is injective in ``k`` modulo 2^64 (the multiplier is
    odd) and the finaliser is a bijection, so distinct ``k < 2^64`` never collide.
    """
    return splitmix64((int(seed) + int(k) * _GOLDEN) & _MASK)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK))
