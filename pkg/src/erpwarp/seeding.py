"""Seed derivation.

Every random draw in the package comes from a single unsigned 64-bit seed.
Sub-streams are keyed by a purpose string and an integer index and mixed
with the SplitMix64 finaliser, so the seed for trial 17 does not depend on
how many other trials were generated before it or in which order.  The
derived 64-bit value seeds numpy's PCG64 generator.
"""

from __future__ import annotations

import zlib

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, stream: str, index: int = 0) -> int:
    key = zlib.crc32(stream.encode("utf-8"))
    z = splitmix64((int(seed) & MASK64) ^ splitmix64(key))
    return splitmix64(z ^ splitmix64(int(index) & MASK64))


def generator(seed: int, stream: str, index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(seed, stream, index)))
