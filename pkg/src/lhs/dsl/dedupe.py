from __future__ import annotations

import hashlib
from typing import Iterable, Mapping, Sequence

import numpy as np

from .program import FeatureFrame, Program, interpret
from .vocab import Task


def behavior_signature(program: Program, frames: Sequence[FeatureFrame]) -> str:
    """Hash of the score vectors on ``frames`` (rounded, signed zero folded)."""
    h = hashlib.sha256(program.task.value.encode())
    for frame in frames:
        scores = np.round(interpret(program, frame), 9) + 0.0
        scores = np.where(np.isnan(scores), np.inf, scores)
        h.update(np.ascontiguousarray(scores).tobytes())
    return h.hexdigest()


def dedupe(corpus: Iterable[Program],
           probes: Mapping[Task, Sequence[FeatureFrame]] | None = None) -> list[Program]:
    """Drop exact token duplicates, then programs whose scores on the probe
    frames match an earlier survivor. First occurrence wins."""
    if probes is None:
        from ..benchmarks.suites import probe_frames

        probes = {t: probe_frames(t) for t in Task}
    seen_ids: set[str] = set()
    seen_behavior: set[str] = set()
    out: list[Program] = []
    for program in corpus:
        if program.id in seen_ids:
            continue
        seen_ids.add(program.id)
        sig = behavior_signature(program, probes[program.task])
        if sig in seen_behavior:
            continue
        seen_behavior.add(sig)
        out.append(program)
    return out
