"""Deterministic RNG stream derivation.

Every stochastic operation in the toolkit draws from a Generator derived
from a 64-bit master seed plus an integer path, so that results are
independent of evaluation order and thread schedule.
"""

import numpy as np

# role tags for dataset generation streams
ROLE_SIGNAL = 1
ROLE_NOISE = 2
ROLE_SNR = 3
ROLE_SPLIT = 4
ROLE_CALIBRATION = 5


def derive_rng(master_seed: int, *path: int) -> np.random.Generator:
    """Generator for the stream identified by (master_seed, *path)."""
    if not 0 <= int(master_seed) < 2**64:
        raise ValueError(f"master_seed must be a 64-bit unsigned integer, got {master_seed}")
    ss = np.random.SeedSequence([int(master_seed)] + [int(p) & 0xFFFFFFFF for p in path])
    return np.random.Generator(np.random.PCG64(ss))
