"""Deterministic per-task random streams.

Every stream is addressed by ``(seed, *key)`` through ``SeedSequence``'s
spawn key, so a replicate draws the same numbers whichever worker runs it
and in whatever order.
"""

import numpy as np

# stream namespaces
DATA = 0
BOOTSTRAP = 1
TRUTH = 2


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))
