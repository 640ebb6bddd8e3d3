"""Splittable, counter-based random streams.

Every stream is a Philox generator whose key is derived from an experiment seed
plus a tuple of integer coordinates (replicate, atom, copy, purpose...). Adding
replicates or atoms never perturbs existing streams, and results do not depend
on the order in which tasks are scheduled.
"""
from __future__ import annotations

import numpy as np

# Purpose tags keep independent uses of the same coordinates apart.
STREAM_COUNTS = 1
STREAM_POSITIONS = 2
STREAM_LARGE_COUNTS = 3
STREAM_TREE = 4
STREAM_MISC = 5


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for ``(seed, *key)``."""
    if seed < 0 or any(k < 0 for k in key):
        raise ValueError("seed and key components must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def child_seed(seed: int, *key: int) -> int:
    """Derive a 63-bit integer seed for ``(seed, *key)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    lo, hi = (int(v) for v in ss.generate_state(2, dtype=np.uint32))
    return (lo | (hi << 32)) >> 1
