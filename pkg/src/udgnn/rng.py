"""Seedable, splittable randomness.

All stochastic operations in the package draw from PCG64 generators derived
from a single integer seed through ``numpy.random.SeedSequence``. String path
components are hashed with CRC32 so that independent streams (labels, edges,
features, dropout, ...) can be split off deterministically by name.
"""

from __future__ import annotations

import zlib

import numpy as np


def _entropy(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part) & 0xFFFFFFFFFFFFFFFF


def make_rng(seed: int, *path) -> np.random.Generator:
    """Return a PCG64 generator for the stream named by ``path`` under ``seed``."""
    seq = np.random.SeedSequence([_entropy(seed)] + [_entropy(p) for p in path])
    return np.random.Generator(np.random.PCG64(seq))


def derive_seed(seed: int, *path) -> int:
    """Collapse a stream name to a plain integer seed (for sweep cells etc.)."""
    seq = np.random.SeedSequence([_entropy(seed)] + [_entropy(p) for p in path])
    return int(seq.generate_state(1, dtype=np.uint32)[0])
