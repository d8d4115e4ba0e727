"""Named, reproducible random streams derived from one root seed."""
from __future__ import annotations

import zlib

import numpy as np


def stream(seed: int, *names) -> np.random.Generator:
    """A generator keyed by ``seed`` and a path of names/ints.

    The same (seed, names) always yields the same stream, and distinct names
    give independent streams.
    """
    key = [int(seed) & 0xFFFFFFFF]
    for n in names:
        if isinstance(n, (int, np.integer)):
            key.append(int(n) & 0xFFFFFFFF)
        else:
            key.append(zlib.crc32(str(n).encode()))
    return np.random.default_rng(np.random.SeedSequence(key))


def child_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**31 - 1))
