"""Named random substreams derived from a single parent seed."""

import numpy as np

SEED_MASK = (1 << 64) - 1


def derive_seed(parent: int, component: str) -> int:
    """Mix a parent seed and a component name into an independent 64-bit seed.

    Adding a new component name never changes the seed of an existing one.
    """
    entropy = [int(parent) & SEED_MASK, *component.encode("utf-8")]
    state = np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)
    return int(state[0])


def make_rng(parent: int, component: str) -> np.random.Generator:
    """Generator for the named substream of ``parent``."""
    return np.random.default_rng(derive_seed(parent, component))
