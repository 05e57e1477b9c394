"""Seeded random streams."""

import numpy as np


def seed_rng(*seeds: int) -> np.random.Generator:
    """Generator keyed on one or more 64-bit integers (negatives wrap mod 2**64).

    Distinct key tuples give statistically independent streams, which is how
    per-epoch and per-fold seeds are derived from a single user seed.
    """
    return np.random.default_rng([int(s) % 2**64 for s in seeds])


def derive_seed(*seeds: int) -> int:
    """Collapse a key tuple into one 64-bit seed."""
    ss = np.random.SeedSequence([int(s) % 2**64 for s in seeds])
    return int(ss.generate_state(1, np.uint64)[0])
