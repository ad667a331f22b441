"""Deterministic per-trial seed derivation.

Trial ``i`` of a run with base seed ``s`` uses ``SeedSequence([s, i])``
hashed to a single 64-bit word, which then seeds a PCG64 generator.
"""

import numpy as np

GENERATOR = "numpy.PCG64/SeedSequence"
MAX_SEED = 2**64 - 1


def derive_seed(base: int, index: int) -> int:
    if not 0 <= base <= MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {base}")
    return int(np.random.SeedSequence([base, index]).generate_state(1, np.uint64)[0])


def trial_rng(base: int, index: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(base, index))
