"""Seeded random streams.

Every stochastic step draws from a generator derived from the experiment seed,
a named stream and the batch (and sample) it belongs to. Streams never share
state, so resuming after batch k replays batches k+1.. exactly.
"""

from enum import IntEnum

import numpy as np


class Stream(IntEnum):
    LHS = 0
    FIT = 1
    PROPOSE = 2
    DEVICE = 3
    ANALYSIS = 4


def make_rng(seed: int, stream: Stream, *keys: int) -> np.random.Generator:
    """Generator for (seed, stream, *keys)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream), *map(int, keys)]))


def derive_seed(seed: int, stream: Stream, *keys: int) -> int:
    """32-bit integer seed for consumers that take a plain int (device simulators)."""
    ss = np.random.SeedSequence([int(seed), int(stream), *map(int, keys)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])
