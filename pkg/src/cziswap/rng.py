"""Counter-based random streams: one reproducible Philox stream per (seed, key path)."""

from __future__ import annotations

import zlib

import numpy as np


def _key(k) -> int:
    if isinstance(k, (int, np.integer)):
        if k < 0:
            raise ValueError("stream keys must be non-negative")
        return int(k)
    return zlib.crc32(str(k).encode())


def stream(seed: int, *keys) -> np.random.Generator:
    """Generator whose draws depend only on ``seed`` and ``keys``, not on call order."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))
