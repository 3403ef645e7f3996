"""Counter-style random streams keyed by integer tuples.

Every random draw in the simulator comes from ``stream(seed, tag, ...)`` so
that a given (seed, round, attempt, ...) always yields the same numbers no
matter what else was sampled before it.
"""

from __future__ import annotations

import numpy as np

LINKS = 0
KEYS = 1
BATCHES = 2
DATA = 3
PARTITION = 4
MODEL_INIT = 5
DELTAS = 6
RADIUS = 7


def stream(seed: int, *key: int) -> np.random.Generator:
    """Generator for ``(seed, *key)``; all words must be nonnegative.

    SeedSequence pads short entropy with zeros, so the seed is split into two
    fixed words and the key length is included to keep keys prefix-free.
    """
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    key = [int(k) for k in key]
    if any(k < 0 for k in key):
        raise ValueError(f"stream key words must be nonnegative, got {key}")
    words = [seed & 0xFFFFFFFF, seed >> 32, len(key)] + key
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))
