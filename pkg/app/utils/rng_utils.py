"""
Random stream helpers.

Every run owns its own numpy Generator. Sweeps derive run streams from
(master seed, seed) and baselines get spawned child streams, so every
variant and baseline evaluated on the same seed sees paired randomness.
"""

from typing import List

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Generator for a single standalone run."""
    return np.random.default_rng(np.random.SeedSequence(seed))


def run_stream(master_seed: int, run_index: int) -> np.random.Generator:
    """
    Generator for run `run_index` of a sweep.

    The stream depends only on (master_seed, run_index), never on worker
    scheduling.
    """
    sequence = np.random.SeedSequence(entropy=master_seed, spawn_key=(run_index,))
    return np.random.default_rng(sequence)


def split(rng: np.random.Generator, count: int) -> List[np.random.Generator]:
    """Independent child generators spawned from `rng`."""
    return list(rng.spawn(count))
