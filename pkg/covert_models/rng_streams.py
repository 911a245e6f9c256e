"""Seeding helpers: independent, reproducible random streams per (master seed, trial, stream)."""

from enum import IntEnum
from typing import Optional, Union

import numpy as np

SeedLike = Union[None, int, np.random.Generator]


class Stream(IntEnum):
    """Substream ids within one trial"""

    WILLIE_H0 = 0
    SECRET = 1
    CHANNEL_H1 = 2
    BOB_TIEBREAK = 3
    PAYLOAD = 4


def trial_rng(master_seed: int, trial_index: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (master_seed, trial_index, stream).

    The key depends only on these three integers, so a trial draws the same
    numbers whichever worker runs it and in whatever order.
    """
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(trial_index), int(stream)))
    return np.random.Generator(np.random.Philox(seq))


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def chunk_seeds(seed: Optional[int], chunks: int):
    """Child sequences for sample-range splitting"""
    return np.random.SeedSequence(seed).spawn(chunks)
