"""Seeded random-number streams.

All randomness in the package flows through Philox (counter-based) generators
keyed by an explicit seed plus a structured key, so independent streams (per
chain, per purpose) never depend on how many other streams exist.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Philox generator for stream ``key`` under ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
