"""Seed streams.

Every random stream is a PCG64 generator seeded from
``SeedSequence([master, *keys])``. String keys are mapped to integers with
CRC-32, so a stream is identified by its master seed and a tuple of
purpose tags, indices and names, independent of call order or threads.
"""
from __future__ import annotations

import zlib

import numpy as np


def _key(k) -> int:
    if isinstance(k, (bool, np.bool_)):
        return int(k)
    if isinstance(k, (int, np.integer)):
        if k < 0:
            raise ValueError("seed keys must be non-negative")
        return int(k)
    return zlib.crc32(str(k).encode("utf-8"))


def derive_seed(master: int, *keys) -> int:
    """A 64-bit integer seed for the stream ``(master, *keys)``."""
    ss = np.random.SeedSequence([_key(master), *(_key(k) for k in keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def derive_rng(master: int, *keys) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(master, *keys)))
