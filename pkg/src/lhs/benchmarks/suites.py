"""Standard search/evaluation benchmarks and the fixed probe sets."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..dsl.program import FeatureFrame
from ..dsl.vocab import Task, as_task
from .evaluate import Benchmark
from .features import feature_frames
from .instances import Family, InstanceSpec
from .rollout import Policy, RolloutInvalid, run_rollout

# Per-instance wall-clock limits in seconds.
SEARCH_TIMEOUT = {Task.TSP: 30.0, Task.CVRP: 30.0, Task.KNAPSACK: 20.0, Task.OBP: 30.0}
EVAL_TIMEOUT = {Task.TSP: 60.0, Task.CVRP: 60.0, Task.KNAPSACK: 20.0, Task.OBP: 30.0}

ALL_FAMILIES = (Family.UNCORRELATED, Family.WEAK, Family.STRONG)
_TASK_SALT = {Task.TSP: 1, Task.CVRP: 2, Task.KNAPSACK: 3, Task.OBP: 4}


@dataclass(frozen=True)
class SuiteSize:
    count: int
    size: int


SEARCH_SIZES = {Task.TSP: SuiteSize(16, 50), Task.CVRP: SuiteSize(16, 50),
                Task.KNAPSACK: SuiteSize(32, 50), Task.OBP: SuiteSize(5, 5000)}
EVAL_SIZES = {Task.TSP: SuiteSize(100, 50), Task.CVRP: SuiteSize(100, 50),
              Task.KNAPSACK: SuiteSize(100, 50), Task.OBP: SuiteSize(10, 5000)}

SEARCH_SEED = 7_000
EVAL_SEED = 9_000


def build_benchmark(task: Task | str, count: int, size: int, seed: int,
                    timeout: float | None = None, family: Family | str | None = None,
                    name: str = "") -> Benchmark:
    task = as_task(task)
    if task is Task.KNAPSACK:
        fams = (Family(family),) if family is not None else ALL_FAMILIES
        spec = InstanceSpec(task, count, size, seed, families=fams)
    else:
        spec = InstanceSpec(task, count, size, seed)
    return Benchmark(task, spec.build(), timeout, name or f"{task.value.lower()}-{count}x{size}-s{seed}")


def search_benchmark(task: Task | str, count: int | None = None, size: int | None = None) -> Benchmark:
    task = as_task(task)
    sz = SEARCH_SIZES[task]
    return build_benchmark(task, count or sz.count, size or sz.size,
                           SEARCH_SEED + _TASK_SALT[task], SEARCH_TIMEOUT[task], name=f"search-{task.value.lower()}")


def eval_benchmark(task: Task | str, count: int | None = None, size: int | None = None,
                   family: Family | str | None = None, seed: int | None = None) -> Benchmark:
    task = as_task(task)
    sz = EVAL_SIZES[task]
    seed = EVAL_SEED + _TASK_SALT[task] if seed is None else seed
    if task is Task.KNAPSACK and family is not None:
        seed += 10 * ALL_FAMILIES.index(Family(family))
    return build_benchmark(task, count or sz.count, size or sz.size, seed, EVAL_TIMEOUT[task], family)


# Probes ---------------------------------------------------------------------

PROBE_SEED = 31_337
_PROBE_SIZE = {Task.TSP: 10, Task.CVRP: 10, Task.KNAPSACK: 12, Task.OBP: 40}


@lru_cache(maxsize=None)
def _probe_instances(task: Task) -> tuple:
    return tuple(build_benchmark(task, 2, _PROBE_SIZE[task], PROBE_SEED + _TASK_SALT[task]).instances)


def probe_instances(task: Task | str) -> tuple:
    """Two tiny instances used to reject broken candidates before benchmarking."""
    return _probe_instances(as_task(task))


@lru_cache(maxsize=None)
def _probe_frames(task: Task) -> tuple[FeatureFrame, ...]:
    frames: list[FeatureFrame] = []
    rng = np.random.default_rng(PROBE_SEED + _TASK_SALT[task])

    def record(state):
        frame = feature_frames(task, state)
        frames.append(frame)
        feas = np.flatnonzero(frame.feasible)
        i = int(feas[rng.integers(len(feas))])
        if task is Task.TSP:
            return int(state.unvisited[i])
        if task is Task.CVRP:
            return int(state.candidates[i])
        if task is Task.KNAPSACK:
            return int(state.remaining[i])
        return i

    policy = Policy(task, custom=record)
    for inst in probe_instances(task):
        run_rollout(policy, inst)
    # Spread eight frames over the recorded trajectory, skipping single-row ones.
    rich = [f for f in frames if f.n_candidates > 1 and f.feasible.sum() > 0]
    picks = np.linspace(0, len(rich) - 1, 8).round().astype(int)
    return tuple(rich[i] for i in picks)


def probe_frames(task: Task | str) -> tuple[FeatureFrame, ...]:
    """Eight fixed feature frames per task, used for finiteness and behavior checks."""
    return _probe_frames(as_task(task))


def probe_validate(policy: Policy) -> bool:
    try:
        for inst in probe_instances(policy.task):
            run_rollout(policy, inst, timeout=5.0)
    except RolloutInvalid:
        return False
    return True
