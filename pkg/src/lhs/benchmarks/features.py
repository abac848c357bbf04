"""Rollout decision states and the feature columns a DSL program sees."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dsl.program import FeatureFrame
from ..dsl.vocab import Task


@dataclass
class TspState:
    current: int
    start: int
    unvisited: np.ndarray  # node ids, ascending
    dist: np.ndarray
    n: int


@dataclass
class CvrpState:
    """Candidate rows are the depot (row 0) followed by unvisited customers."""

    current: int
    unvisited: np.ndarray  # node ids (1-based), ascending
    rest: int
    capacity: int
    demands: np.ndarray  # per node, depot = 0
    dist: np.ndarray

    @property
    def candidates(self) -> np.ndarray:
        return np.concatenate([[0], self.unvisited]).astype(np.int64)


@dataclass
class KnapsackState:
    remaining_capacity: int
    remaining: np.ndarray  # item indices still available
    weights: np.ndarray
    values: np.ndarray


@dataclass
class ObpState:
    item: int
    bins: np.ndarray  # remaining capacity of every open bin
    capacity: int


State = TspState | CvrpState | KnapsackState | ObpState


def tsp_frame(s: TspState) -> FeatureFrame:
    cand = s.unvisited
    k = len(cand)
    f0 = s.dist[s.current, cand]
    f1 = s.dist[s.start, cand]
    if k > 1:
        sub = s.dist[np.ix_(cand, cand)]
        f2 = sub.sum(axis=1) / (k - 1)
        masked = sub + np.diag(np.full(k, np.inf))
        f3 = masked.min(axis=1)
    else:
        f2 = np.zeros(1)
        f3 = np.zeros(1)
    f4 = np.full(k, k / s.n)
    return FeatureFrame(Task.TSP, np.column_stack([f0, f1, f2, f3, f4]), np.ones(k, dtype=bool))


def cvrp_frame(s: CvrpState) -> FeatureFrame:
    cand = s.candidates
    dem = s.demands[cand].astype(float)
    f0 = s.dist[s.current, cand]
    f1 = s.dist[0, cand]
    f3 = dem / max(s.rest, 1)
    f4 = s.rest - dem
    f4[0] = s.capacity  # returning to the depot refills the vehicle
    feasible = dem <= s.rest
    feasible[0] = s.current != 0
    return FeatureFrame(Task.CVRP, np.column_stack([f0, f1, dem, f3, f4]), feasible)


def knapsack_frame(s: KnapsackState) -> FeatureFrame:
    w = s.weights[s.remaining].astype(float)
    v = s.values[s.remaining].astype(float)
    cap = max(s.remaining_capacity, 1)
    matrix = np.column_stack([w, v, v / w, w / cap])
    return FeatureFrame(Task.KNAPSACK, matrix, w <= s.remaining_capacity)


def obp_frame(s: ObpState) -> FeatureFrame:
    matrix = np.empty((len(s.bins), 4))
    b = matrix[:, 0]
    b[:] = s.bins
    np.subtract(b, s.item, out=matrix[:, 1])
    np.divide(matrix[:, 1], s.capacity, out=matrix[:, 2])
    np.subtract(s.capacity, b, out=matrix[:, 3])
    matrix[:, 3] /= s.capacity
    return FeatureFrame(Task.OBP, matrix, s.bins >= s.item)


_FRAMES = {Task.TSP: tsp_frame, Task.CVRP: cvrp_frame, Task.KNAPSACK: knapsack_frame, Task.OBP: obp_frame}


def feature_frames(task: Task, state: State) -> FeatureFrame:
    return _FRAMES[Task(task)](state)
