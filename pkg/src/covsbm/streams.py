"""Counter-based random streams keyed by (seed, replication, purpose)."""
from __future__ import annotations

import numpy as np

PURPOSES = {
    "covariates": 0,
    "communities": 1,
    "adjacency": 2,
    "kmeans": 3,
    "misc": 4,
}


def stream(seed: int, replication: int = 0, purpose: str = "misc") -> np.random.Generator:
    """Independent Philox generator for one (seed, replication, purpose) key.

    Streams with different keys never overlap, so workers can draw from
    disjoint keys in any order and still reproduce a serial run bitwise.
    """
    if purpose not in PURPOSES:
        raise ValueError(f"unknown stream purpose {purpose!r}; expected one of {sorted(PURPOSES)}")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replication), PURPOSES[purpose]))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return stream(int(seed))
