"""Seed sampling, round-robin augmentation, dedupe and scoring of the program corpus."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..benchmarks import Benchmark, Policy, evaluate, probe_frames, search_benchmark
from ..diffmath import seeded_rng
from ..dsl import CorpusEntry, Program, Strategy, Task, augment, behavior_signature, dedupe, sample_seed_program
from ..dsl.vocab import TASKS

ROUND_ROBIN = (Strategy.SYNTACTIC, Strategy.PARAMETRIC, Strategy.BEHAVIORAL)


@dataclass
class CorpusConfig:
    tasks: tuple[Task, ...] = TASKS
    seeds_per_task: int = 100
    factor: int = 5
    seed: int = 0
    max_depth: int = 4
    score: bool = True
    parallelism: int = 1


def grow_task(task: Task, n_seeds: int, factor: int, seed: int, max_depth: int = 4,
              max_tries: int = 8) -> list[tuple[Program, str]]:
    """Seeds plus augmentations, strategies cycling S, P, B, until each seed's
    lineage holds ``factor`` behaviorally distinct programs (bounded tries).

    Each augmentation starts from a random member of its seed's lineage, so
    rewrites compose: a syntactic variant never adds a new behavior itself but
    becomes a parent for later parametric and behavioral steps.
    """
    rng = seeded_rng((seed, TASKS.index(task)))
    probes = probe_frames(task)
    seeds = [sample_seed_program(task, rng, max_depth) for _ in range(n_seeds)]
    out: list[tuple[Program, str]] = [(p, "seed") for p in seeds]
    seen = {behavior_signature(p, probes) for p in seeds}
    k = 0
    for s in seeds:
        lineage = [s]
        distinct = 1
        for _ in range(max_tries * (factor - 1)):
            if distinct >= factor:
                break
            strategy = ROUND_ROBIN[k % 3]
            k += 1
            child = augment(lineage[rng.integers(len(lineage))], strategy, rng)
            lineage.append(child)
            out.append((child, strategy.value))
            sig = behavior_signature(child, probes)
            if sig not in seen:
                seen.add(sig)
                distinct += 1
    return out


def score_program(program: Program, bench: Benchmark, parallelism: int = 1) -> float | None:
    score = evaluate(Policy.from_program(program), bench, parallelism)
    return score.s if score.valid else None


def build_corpus(cfg: CorpusConfig, benchmarks: dict[Task, Benchmark] | None = None,
                 progress=None) -> list[CorpusEntry]:
    entries: list[CorpusEntry] = []
    for task in cfg.tasks:
        grown = grow_task(task, cfg.seeds_per_task, cfg.factor, cfg.seed, cfg.max_depth)
        source = {}
        for p, src in grown:
            source.setdefault(p.id, src)
        survivors = dedupe([p for p, _ in grown])
        bench = None
        if cfg.score:
            bench = (benchmarks or {}).get(task) or search_benchmark(task)
        for i, p in enumerate(survivors):
            score = score_program(p, bench, cfg.parallelism) if bench is not None else None
            entries.append(CorpusEntry(p, source[p.id], score))
            if progress is not None:
                progress(task, i + 1, len(survivors))
    return entries


def scored(entries: Sequence[CorpusEntry], task: Task | None = None) -> list[CorpusEntry]:
    return [e for e in entries if e.score is not None and (task is None or e.program.task is task)]
