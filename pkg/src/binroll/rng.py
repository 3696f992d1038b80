"""Seeded randomness: one counter-based generator family for the whole package."""

from __future__ import annotations

import numpy as np


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Philox generator for (seed, *stream); distinct streams are independent."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


def as_rng(rng: np.random.Generator | int) -> np.random.Generator:
    """Accept either an explicit seed or an already-built generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    return make_rng(int(rng))
