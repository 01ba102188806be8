"""
Counter-based random streams.

Every stream is a Philox generator keyed by SeedSequence(master_seed,
spawn_key=(kind, index)). A stream depends only on its coordinates, never on the
order in which streams are created or on how work is spread over workers.
"""

import numpy as np

# stream kinds
FEYNMAN_KAC_BATCH = 1
BOOK_PATH = 2
VALIDATION = 3

SEED_MASK = (1 << 64) - 1


def stream(master_seed: int, kind: int, index: int) -> np.random.Generator:
    """
    Return the generator for stream (kind, index) of a master seed.

    Args:
        master_seed: 64-bit unsigned run seed
        kind: Stream family (FEYNMAN_KAC_BATCH, BOOK_PATH, ...)
        index: Batch or path index inside the family

    Returns:
        numpy Generator backed by Philox
    """
    seq = np.random.SeedSequence(int(master_seed) & SEED_MASK, spawn_key=(int(kind), int(index)))
    return np.random.Generator(np.random.Philox(seq))
