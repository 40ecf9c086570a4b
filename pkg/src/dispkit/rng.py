"""Counter-based random streams.

Every random quantity is addressed by ``(seed, purpose, trial)``; inside a
trial, point ``j`` axis ``i`` is the ``j*d + i``-th double of the stream. So
a coordinate depends only on ``(seed, purpose, trial, point, axis)`` and never
on how trials are spread over workers, and longer samples extend shorter
ones (the prefix property used for nested sampling).
"""

from __future__ import annotations

import os
import zlib

import numpy as np

SEED_ENV = "DISPKIT_SEED"


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    return int(raw) if raw not in (None, "") else 0


def _purpose_id(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def trial_generator(seed: int, trial: int, purpose: str = "points") -> np.random.Generator:
    if seed < 0 or trial < 0:
        raise ValueError("seed and trial index must be nonnegative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(_purpose_id(purpose), int(trial)))
    return np.random.Generator(np.random.Philox(ss))
