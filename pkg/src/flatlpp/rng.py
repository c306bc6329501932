"""Keyed counter-based random streams.

A master seed expands into independent substreams addressed by a key such as
``("cell", i, j)`` or ``("replica", k)``.  Streams use the Philox
counter-based bit generator, so a key always yields the same numbers no
matter in which order, or in which process, the streams are created.
"""
from __future__ import annotations

import zlib

import numpy as np


def _key_int(part) -> int:
    if isinstance(part, (bool, np.bool_)):
        return int(part)
    if isinstance(part, (int, np.integer)):
        v = int(part)
        return 2 * v if v >= 0 else -2 * v - 1
    if isinstance(part, str):
        return zlib.crc32(part.encode()) | (1 << 32)
    raise TypeError(f"unsupported key part {part!r}")


def substream(seed: int, *key) -> np.random.Generator:
    """Generator for ``key`` under master ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key_int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def child_seed(seed: int, *key) -> int:
    """A 63-bit integer seed derived from ``(seed, key)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key_int(k) for k in key))
    return int(ss.generate_state(2, np.uint64)[0] >> np.uint64(1))
