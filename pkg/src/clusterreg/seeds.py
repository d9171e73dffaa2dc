"""Deterministic RNG stream derivation.

Every random draw in the package flows through a `numpy.random.Generator`
built from a root seed plus an integer path (namespace, indices). Streams
derived from distinct paths are independent, and results never depend on
the order in which streams are consumed, so parallel execution cannot
change any output.
"""

from __future__ import annotations

import numpy as np

# Namespace constants keep unrelated consumers of the same root seed on
# disjoint SeedSequence paths.
NS_START = 1
NS_RESTART = 2
NS_FOLD = 3
NS_GRANGE = 4
NS_REP = 5

_MASK64 = (1 << 64) - 1


def seed_sequence(seed: int, *path: int) -> np.random.SeedSequence:
    if any(p < 0 for p in path):
        raise ValueError(f"seed path must be non-negative, got {path}")
    return np.random.SeedSequence(entropy=int(seed) & _MASK64, spawn_key=tuple(int(p) for p in path))


def rng_from(seed: int, *path: int) -> np.random.Generator:
    """Generator for the stream identified by (seed, *path)."""
    return np.random.default_rng(seed_sequence(seed, *path))


def child_seed(seed: int, *path: int) -> int:
    """A plain integer seed derived from (seed, *path), for sub-configs."""
    state = seed_sequence(seed, *path).generate_state(2, dtype=np.uint64)
    return int(state[0]) & _MASK64
