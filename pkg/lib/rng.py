"""
Seeded generators. Every stochastic operation takes an explicit seed or
numpy Generator so runs are pure functions of their arguments.
"""

from __future__ import annotations

from typing import Sequence, Union

import numpy as np

SeedLike = Union[int, np.random.Generator, None]


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Return a Generator for seed; a Generator passes through unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def child_seeds(seed: int, n: int) -> list[int]:
    """n independent integer seeds derived from seed (order-stable, for per-item streams)."""
    ss = np.random.SeedSequence(int(seed))
    return [int(c.generate_state(1, dtype=np.uint32)[0]) for c in ss.spawn(int(n))]


def sample_index(rng: np.random.Generator, probs: Sequence[float]) -> int:
    """Draw one index from a finite distribution by inverse-CDF on a single uniform."""
    cdf = np.cumsum(np.asarray(probs, dtype=float))
    u = rng.random() * cdf[-1]
    idx = int(np.searchsorted(cdf, u, side="right"))
    return min(idx, len(cdf) - 1)
