"""Instance types and seeded generators for the four tasks."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from ..dsl.vocab import Task

CVRP_CAPACITY = 40
KNAPSACK_CAPACITY = 100
OBP_CAPACITY = 100
WEIBULL_SHAPE = 3.0
WEIBULL_SCALE = 45.0


class Family(str, Enum):
    UNCORRELATED = "UNCORRELATED"
    WEAK = "WEAK"
    STRONG = "STRONG"


def _distances(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt((diff**2).sum(-1))


@dataclass(eq=False)
class TspInstance:
    coords: np.ndarray
    seed: int | None = None
    task = Task.TSP

    @property
    def n(self) -> int:
        return len(self.coords)

    @cached_property
    def dist(self) -> np.ndarray:
        return _distances(self.coords)


@dataclass(eq=False)
class CvrpInstance:
    depot: np.ndarray
    customers: np.ndarray
    demands: np.ndarray
    capacity: int = CVRP_CAPACITY
    seed: int | None = None
    task = Task.CVRP

    @property
    def n(self) -> int:
        return len(self.customers)

    @cached_property
    def points(self) -> np.ndarray:
        return np.vstack([self.depot[None, :], self.customers])

    @cached_property
    def dist(self) -> np.ndarray:
        """Node 0 is the depot, node i the (i-1)-th customer."""
        return _distances(self.points)

    @cached_property
    def node_demands(self) -> np.ndarray:
        return np.concatenate([[0], self.demands]).astype(np.int64)


@dataclass(eq=False)
class KnapsackInstance:
    weights: np.ndarray
    values: np.ndarray
    capacity: int = KNAPSACK_CAPACITY
    family: Family = Family.UNCORRELATED
    seed: int | None = None
    task = Task.KNAPSACK

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def items(self) -> list[tuple[int, int, int]]:
        return [(int(w), int(v), i) for i, (w, v) in enumerate(zip(self.weights, self.values))]


@dataclass(eq=False)
class ObpInstance:
    sizes: np.ndarray
    capacity: int = OBP_CAPACITY
    seed: int | None = None
    task = Task.OBP

    @property
    def n(self) -> int:
        return len(self.sizes)


Instance = TspInstance | CvrpInstance | KnapsackInstance | ObpInstance


def gen_tsp(n: int, rng: np.random.Generator, seed: int | None = None) -> TspInstance:
    if n < 2:
        raise ValueError("TSP needs at least 2 cities")
    return TspInstance(rng.random((n, 2)), seed)


def gen_cvrp(n: int, capacity: int, rng: np.random.Generator, seed: int | None = None) -> CvrpInstance:
    if n < 1 or capacity < 9:
        raise ValueError("CVRP needs n >= 1 and capacity >= max demand (9)")
    depot = rng.random(2)
    customers = rng.random((n, 2))
    demands = rng.integers(1, 10, size=n)
    return CvrpInstance(depot, customers, demands, capacity, seed)


def gen_knapsack(family: Family | str, n: int, capacity: int, rng: np.random.Generator,
                 seed: int | None = None) -> KnapsackInstance:
    family = Family(family)
    weights = rng.integers(1, 101, size=n)
    if family is Family.UNCORRELATED:
        values = rng.integers(1, 101, size=n)
    elif family is Family.WEAK:
        lo = np.maximum(1, weights - 10)
        values = rng.integers(lo, weights + 11)
    else:
        values = weights + 10
    return KnapsackInstance(weights, values, capacity, family, seed)


def gen_obp(length: int, rng: np.random.Generator, capacity: int = OBP_CAPACITY,
            seed: int | None = None) -> ObpInstance:
    raw = WEIBULL_SCALE * rng.weibull(WEIBULL_SHAPE, size=length)
    sizes = np.clip(np.round(raw), 1, capacity).astype(np.int64)
    return ObpInstance(sizes, capacity, seed)


def instance_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


@dataclass
class InstanceSpec:
    """Recipe for a reproducible instance set."""

    task: Task
    count: int
    size: int
    seed: int
    family: Family | None = None
    capacity: int | None = None
    families: tuple[Family, ...] = field(default_factory=tuple)

    def build(self) -> list[Instance]:
        out: list[Instance] = []
        for i in range(self.count):
            rng = instance_rng(self.seed, i)
            seed = self.seed * 100_003 + i
            if self.task is Task.TSP:
                out.append(gen_tsp(self.size, rng, seed))
            elif self.task is Task.CVRP:
                out.append(gen_cvrp(self.size, self.capacity or CVRP_CAPACITY, rng, seed))
            elif self.task is Task.KNAPSACK:
                fams = self.families or (self.family or Family.UNCORRELATED,)
                out.append(gen_knapsack(fams[i % len(fams)], self.size,
                                        self.capacity or KNAPSACK_CAPACITY, rng, seed))
            else:
                out.append(gen_obp(self.size, rng, self.capacity or OBP_CAPACITY, seed))
        return out
