"""Seed derivation.

Every random stream is a Philox (counter-based) generator keyed by a 64-bit
seed. Child seeds are derived by hashing ``(master_seed, *indices)`` through
``numpy.random.SeedSequence``, so a trial's stream does not depend on how many
other trials ran before it.
"""

import numpy as np


def derive_seed(master_seed: int, *indices: int) -> int:
    seq = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(i) for i in indices))
    return int(seq.generate_state(1, np.uint64)[0])


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
