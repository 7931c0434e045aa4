"""Deterministic random streams keyed by experiment coordinates.

Every stream is ``PCG64(SeedSequence(seed, spawn_key=(purpose, *keys)))``.
Grid values enter the key through the bit pattern of their float64
representation, so a stream depends on the value of ``zeta`` (not on its
position in the grid) and removing a grid point leaves the other streams
untouched.
"""

from __future__ import annotations

import struct
from enum import IntEnum

import numpy as np

__all__ = ["Purpose", "value_key", "stream"]


class Purpose(IntEnum):
    TRAIN = 1
    TEST = 2
    RS_POPULATION = 3
    THEORY_POPULATION = 4
    CLI = 5


def value_key(x: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", float(x)))[0]


def stream(seed: int, purpose: Purpose, *keys: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(purpose),) + tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))
