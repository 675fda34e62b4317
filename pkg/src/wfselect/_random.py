"""Per-replicate random streams.

Each replicate gets its own counter-based Philox generator keyed by
``(seed, replicate index)``. Results therefore do not depend on the order
in which replicates run or on how they are spread over threads.
"""
from __future__ import annotations

import numpy as np


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for replicate ``index`` of a run seeded with ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def block_rng(seed: int, index: int, block: int) -> np.random.Generator:
    """Generator for a sub-stream of a replicate (e.g. a proposal pool)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index), int(block)))
    return np.random.Generator(np.random.Philox(ss))
