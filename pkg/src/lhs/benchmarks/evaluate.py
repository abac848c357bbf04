"""Benchmark scoring: y(p) is the mean instance cost, s(p) = alpha * y(p)."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from ..diffmath.tensor import ContractError
from ..dsl.vocab import Task
from .instances import Instance
from .rollout import Policy, RolloutInvalid, run_rollout

ALPHA = {Task.TSP: -1, Task.CVRP: -1, Task.KNAPSACK: 1, Task.OBP: -1}


@dataclass
class Benchmark:
    task: Task
    instances: list[Instance]
    timeout: float | None = None
    name: str = ""

    @property
    def alpha(self) -> int:
        return ALPHA[self.task]


@dataclass
class InstanceResult:
    index: int
    cost: float | None
    wall_ms: float
    valid: bool
    error: str | None = None


@dataclass
class Score:
    y: float | None
    s: float | None
    costs: list[float]
    valid: bool
    wall_time: float
    error: str | None = None
    per_instance: list[InstanceResult] = field(default_factory=list, repr=False)


def _one(policy: Policy, inst: Instance, index: int, timeout: float | None) -> InstanceResult:
    t0 = time.perf_counter()
    try:
        cost = run_rollout(policy, inst, timeout).cost
    except RolloutInvalid as exc:
        return InstanceResult(index, None, 1e3 * (time.perf_counter() - t0), False, str(exc))
    if not math.isfinite(cost):
        return InstanceResult(index, None, 1e3 * (time.perf_counter() - t0), False, "non-finite cost")
    return InstanceResult(index, cost, 1e3 * (time.perf_counter() - t0), True)


def evaluate(policy: Policy, bench: Benchmark, parallelism: int = 1) -> Score:
    """Score a policy; misbehaving programs yield an invalid Score, not an exception."""
    if not bench.instances:
        raise ContractError("benchmark has no instances")
    if policy.task is not bench.task:
        raise ContractError(f"policy task {policy.task.value} != benchmark task {bench.task.value}")
    t0 = time.perf_counter()
    jobs = list(enumerate(bench.instances))
    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(lambda j: _one(policy, j[1], j[0], bench.timeout), jobs))
    else:
        results = []
        for i, inst in jobs:
            r = _one(policy, inst, i, bench.timeout)
            results.append(r)
            if not r.valid:
                break
    wall = time.perf_counter() - t0
    bad = next((r for r in results if not r.valid), None)
    if bad is not None:
        return Score(None, None, [], False, wall, f"instance {bad.index}: {bad.error}", results)
    costs = [r.cost for r in results]
    y = math.fsum(costs) / len(costs)
    return Score(y, bench.alpha * y, costs, True, wall, None, results)
