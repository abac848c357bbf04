"""Constructive rollouts shared by DSL programs and reference heuristics."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from ..dsl.program import InvalidProgram, Program, choose
from ..dsl.vocab import Task, as_task
from .features import (
    CvrpState,
    KnapsackState,
    ObpState,
    TspState,
    cvrp_frame,
    knapsack_frame,
    obp_frame,
    tsp_frame,
)
from .instances import CvrpInstance, Instance, KnapsackInstance, ObpInstance, TspInstance
from .reference import REFERENCES


class RolloutInvalid(Exception):
    """The policy misbehaved on an instance."""


class RolloutTimeout(RolloutInvalid):
    pass


@dataclass(frozen=True)
class Policy:
    task: Task
    program: Program | None = None
    reference: str | None = None
    custom: Callable[[Any], Any] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "task", as_task(self.task))
        if sum(x is not None for x in (self.program, self.reference, self.custom)) != 1:
            raise ValueError("policy needs exactly one of program, reference, custom")
        if self.program is not None and self.program.task is not self.task:
            raise ValueError("program task does not match policy task")

    @classmethod
    def from_program(cls, program: Program) -> "Policy":
        return cls(program.task, program=program)

    @property
    def id(self) -> str:
        if self.program is not None:
            return self.program.id
        return self.reference or "custom"

    def decide(self, state):
        if self.custom is not None:
            return self.custom(state)
        if self.reference is not None:
            return REFERENCES[self.reference][1](state)
        return _PROGRAM_DECIDE[self.task](self.program, state)


def reference_heuristic(name: str) -> Policy:
    if name not in REFERENCES:
        raise KeyError(f"unknown reference heuristic {name!r}")
    return Policy(REFERENCES[name][0], reference=name)


def _decide_tsp(p: Program, s: TspState) -> int:
    return int(s.unvisited[choose(p, tsp_frame(s))])


def _decide_cvrp(p: Program, s: CvrpState) -> int:
    return int(s.candidates[choose(p, cvrp_frame(s))])


def _decide_knapsack(p: Program, s: KnapsackState) -> int:
    return int(s.remaining[choose(p, knapsack_frame(s))])


def _decide_obp(p: Program, s: ObpState) -> int:
    return choose(p, obp_frame(s))


_PROGRAM_DECIDE = {Task.TSP: _decide_tsp, Task.CVRP: _decide_cvrp,
                   Task.KNAPSACK: _decide_knapsack, Task.OBP: _decide_obp}


@dataclass
class RolloutResult:
    cost: float
    solution: Any
    steps: int


class _Clock:
    def __init__(self, timeout: float | None):
        self.deadline = None if timeout is None else time.perf_counter() + timeout

    def tick(self):
        if self.deadline is not None and time.perf_counter() > self.deadline:
            raise RolloutTimeout("per-instance timeout exceeded")


def _ask(policy: Policy, state):
    try:
        return policy.decide(state)
    except InvalidProgram as exc:
        raise RolloutInvalid(str(exc)) from exc


def _tsp(policy: Policy, inst: TspInstance, clock: _Clock) -> RolloutResult:
    D = inst.dist
    visited = np.zeros(inst.n, dtype=bool)
    visited[0] = True
    cur, tour, length = 0, [0], 0.0
    while not visited.all():
        clock.tick()
        state = TspState(cur, 0, np.flatnonzero(~visited), D, inst.n)
        nxt = _ask(policy, state)
        if not (0 <= nxt < inst.n) or visited[nxt]:
            raise RolloutInvalid(f"TSP policy chose illegal city {nxt}")
        length += D[cur, nxt]
        visited[nxt] = True
        cur = nxt
        tour.append(nxt)
    length += D[cur, 0]
    return RolloutResult(float(length), tour, len(tour) - 1)


def _cvrp(policy: Policy, inst: CvrpInstance, clock: _Clock) -> RolloutResult:
    D, dem, cap = inst.dist, inst.node_demands, inst.capacity
    served = np.zeros(inst.n + 1, dtype=bool)
    served[0] = True
    cur, rest, cost = 0, cap, 0.0
    routes: list[list[int]] = [[]]
    budget = 4 * (inst.n + 1)
    steps = 0
    while not served.all():
        clock.tick()
        steps += 1
        if steps > budget:
            raise RolloutInvalid("CVRP step budget exhausted")
        unvisited = np.flatnonzero(~served)
        if not (dem[unvisited] <= rest).any():
            nxt = 0
        else:
            nxt = _ask(policy, CvrpState(cur, unvisited, rest, cap, dem, D))
        if nxt == 0:
            cost += D[cur, 0]
            cur, rest = 0, cap
            if routes[-1]:
                routes.append([])
            continue
        if not (0 < nxt <= inst.n) or served[nxt] or dem[nxt] > rest:
            raise RolloutInvalid(f"CVRP policy chose illegal node {nxt}")
        cost += D[cur, nxt]
        rest -= int(dem[nxt])
        served[nxt] = True
        cur = nxt
        routes[-1].append(nxt)
    cost += D[cur, 0]
    return RolloutResult(float(cost), [r for r in routes if r], steps)


def _knapsack(policy: Policy, inst: KnapsackInstance, clock: _Clock) -> RolloutResult:
    w, v = inst.weights, inst.values
    taken = np.zeros(inst.n, dtype=bool)
    rem, value, chosen = int(inst.capacity), 0, []
    while True:
        clock.tick()
        remaining = np.flatnonzero(~taken)
        if not (w[remaining] <= rem).any():
            break
        pick = _ask(policy, KnapsackState(rem, remaining, w, v))
        if pick is None:
            break
        if not (0 <= pick < inst.n) or taken[pick] or w[pick] > rem:
            raise RolloutInvalid(f"knapsack policy chose illegal item {pick}")
        taken[pick] = True
        rem -= int(w[pick])
        value += int(v[pick])
        chosen.append(int(pick))
    return RolloutResult(float(value), chosen, len(chosen))


def _obp(policy: Policy, inst: ObpInstance, clock: _Clock) -> RolloutResult:
    cap = inst.capacity
    bins = np.empty(inst.n, dtype=np.int64)
    assignment = np.empty(inst.n, dtype=np.int64)
    k = 0
    for t, size in enumerate(inst.sizes):
        clock.tick()
        size = int(size)
        open_bins = bins[:k]
        if not (open_bins >= size).any():
            bins[k] = cap - size
            assignment[t] = k
            k += 1
            continue
        j = _ask(policy, ObpState(size, open_bins, cap))
        if not (0 <= j < k) or bins[j] < size:
            raise RolloutInvalid(f"OBP policy chose illegal bin {j}")
        bins[j] -= size
        assignment[t] = j
    return RolloutResult(float(k), assignment, inst.n)


_ROLLOUTS = {Task.TSP: _tsp, Task.CVRP: _cvrp, Task.KNAPSACK: _knapsack, Task.OBP: _obp}


def run_rollout(policy: Policy, instance: Instance, timeout: float | None = None) -> RolloutResult:
    if policy.task is not instance.task:
        raise ValueError(f"policy task {policy.task.value} != instance task {instance.task.value}")
    return _ROLLOUTS[policy.task](policy, instance, _Clock(timeout))


def rollout(policy: Policy, instance: Instance, timeout: float | None = None) -> float:
    return run_rollout(policy, instance, timeout).cost
