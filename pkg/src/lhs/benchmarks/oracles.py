"""Exhaustive solvers for tiny instances, written independently of the rollouts."""

from __future__ import annotations

import itertools
import math


def knapsack_optimum(weights, values, capacity: int) -> int:
    n = len(weights)
    if n > 20:
        raise ValueError("exhaustive knapsack limited to n <= 20")
    best = 0
    for mask in range(1 << n):
        w = v = 0
        for i in range(n):
            if mask >> i & 1:
                w += int(weights[i])
                v += int(values[i])
        if w <= capacity and v > best:
            best = v
    return best


def tsp_optimum(coords) -> float:
    pts = [tuple(map(float, p)) for p in coords]
    n = len(pts)
    if n > 9:
        raise ValueError("exhaustive TSP limited to n <= 9")
    if n < 2:
        return 0.0

    def d(a, b):
        return math.hypot(pts[a][0] - pts[b][0], pts[a][1] - pts[b][1])

    best = math.inf
    for perm in itertools.permutations(range(1, n)):
        tour = (0, *perm, 0)
        length = sum(d(tour[i], tour[i + 1]) for i in range(n))
        best = min(best, length)
    return best
