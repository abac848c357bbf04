from __future__ import annotations

import numpy as np


def seeded_rng(seed: int | tuple[int, ...] | list[int]) -> np.random.Generator:
    """PCG64 generator; the stream for a given seed is platform independent."""
    if isinstance(seed, (tuple, list)):
        return np.random.default_rng(np.random.SeedSequence([int(s) & 0xFFFFFFFFFFFFFFFF for s in seed]))
    return np.random.default_rng(np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF))


def child_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**63 - 1))
