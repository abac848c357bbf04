from __future__ import annotations

from typing import Sequence

import numpy as np

from .program import FeatureFrame, ParseError, Program, finite_on, from_tree, parse
from .vocab import BINARY, CONSTANTS, UNARY, Task, as_task, task_features

MAX_ATTEMPTS = 100
FALLBACK = ("NEG", "F0")


def _default_probes(task: Task) -> Sequence[FeatureFrame]:
    from ..benchmarks.suites import probe_frames

    return probe_frames(task)


def random_tree(task: Task, rng: np.random.Generator, max_depth: int, *,
                leaf_prob: float = 0.3, feature_prob: float = 0.75) -> tuple:
    feats = task_features(task)

    def leaf():
        if rng.random() < feature_prob:
            return (feats[rng.integers(len(feats))],)
        return (CONSTANTS[rng.integers(len(CONSTANTS))],)

    def grow(depth: int):
        if depth >= max_depth or (depth > 1 and rng.random() < leaf_prob):
            return leaf()
        if rng.random() < 0.7:
            op = BINARY[rng.integers(len(BINARY))]
            return (op, grow(depth + 1), grow(depth + 1))
        op = UNARY[rng.integers(len(UNARY))]
        return (op, grow(depth + 1))

    return grow(1)


def sample_seed_program(task: Task | str, rng: np.random.Generator, max_depth: int = 4,
                        probes: Sequence[FeatureFrame] | None = None) -> Program:
    """Grammar-directed random program, resampled until finite on the probes.

    Falls back to ``NEG F0`` after 100 rejected draws.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    task = as_task(task)
    probes = _default_probes(task) if probes is None else probes
    for _ in range(MAX_ATTEMPTS):
        try:
            program = from_tree(random_tree(task, rng, max_depth), task)
        except ParseError:
            continue
        if finite_on(program, probes):
            return program
    return parse(FALLBACK, task)
