"""Reference heuristics written against the same rollout states as DSL programs.

The ``select_*`` and ``priority_*`` functions keep the original call
signatures; the ``decide_*`` adapters translate a rollout state into them.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..dsl.vocab import Task
from .features import CvrpState, KnapsackState, ObpState, TspState


# TSP -----------------------------------------------------------------------

def select_tsp_nn(current_node, destination_node, unvisited_nodes, distance_matrix):
    if len(unvisited_nodes) == 0:
        return -1
    distances_to_unvisited = distance_matrix[current_node, unvisited_nodes]
    next_node_idx = np.argmin(distances_to_unvisited)
    return unvisited_nodes[next_node_idx]


def select_tsp_lhs(current_node, destination_node, unvisited_nodes, distance_matrix):
    if unvisited_nodes.size == 0:
        return int(destination_node)
    cand = unvisited_nodes.astype(int)
    r = distance_matrix[current_node, cand]
    d = distance_matrix[np.ix_(cand, cand)].copy()
    n = int(np.sum(unvisited_nodes == cand))
    d = np.exp(-d / (1e-6 + np.max(d) + 1e-6))
    score = (r + (d.sum(axis=1) * (1.0 / (n + 1e-6)))).clip(0, None)
    score += np.arange(len(score)) * 1e-9
    return int(cand[int(np.argmin(score))])


# CVRP ----------------------------------------------------------------------

def select_cvrp_lhs(current_node, depot, unvisited_nodes, rest_capacity, demands, distance_matrix):
    if len(unvisited_nodes) == 0:
        return depot
    cap = float(rest_capacity)
    feasible = np.array([n for n in unvisited_nodes if demands[n] <= cap], dtype=int)
    if len(feasible) == 0:
        return depot
    d_cur = distance_matrix[current_node, feasible]
    d_dep = distance_matrix[depot, feasible]
    d_cur_adj = np.clip(d_cur - d_dep, -np.inf, 1e12)
    return int(feasible[np.argmin(d_cur_adj)])


# Knapsack ------------------------------------------------------------------

def select_knapsack_lhs(remaining_capacity, remaining_items):
    fit = [(w, v, idx) for (w, v, idx) in remaining_items if w <= remaining_capacity]
    if not fit:
        return None
    for w, v, idx in fit:
        if w == 0:
            return (w, v, idx)
    best_score = -np.inf
    best_item = None
    for w, v, idx in fit:
        score = (v / max(1e-12, float(w))) * (1.0 + 0.5 * (w / remaining_capacity))
        if score > best_score:
            best_score = score
            best_item = (w, v, idx)
    return best_item


def select_knapsack_eoh(remaining_capacity, remaining_items):
    if not remaining_items:
        return None
    best_item = None
    max_ratio = -1
    for weight, value, index in remaining_items:
        if weight <= remaining_capacity:
            ratio = value / weight
            if ratio > max_ratio:
                max_ratio = ratio
                best_item = (weight, value, index)
    return best_item if best_item else None


def select_knapsack_ratio(remaining_capacity, remaining_items):
    """Plain value/weight greedy; ties go to the lowest index."""
    fit = [t for t in remaining_items if t[0] <= remaining_capacity]
    if not fit:
        return None
    return max(fit, key=lambda t: (t[1] / t[0], -t[2]))


# OBP -----------------------------------------------------------------------

def priority_obp_lhs(item, bins):
    a = bins.copy().astype(float)
    a[a < item] = -np.inf
    return -np.clip(a, 0, None)


def priority_best_fit(item, bins):
    return -(bins - item).astype(float)


def priority_first_fit(item, bins):
    return -np.arange(len(bins), dtype=float)


# State adapters ------------------------------------------------------------

def _tsp(select):
    def decide(s: TspState) -> int:
        return int(select(s.current, s.start, s.unvisited, s.dist))
    return decide


def _cvrp(select):
    def decide(s: CvrpState) -> int:
        return int(select(s.current, 0, s.unvisited, s.rest, s.demands, s.dist))
    return decide


def _knapsack(select):
    def decide(s: KnapsackState) -> int | None:
        items = [(int(s.weights[i]), int(s.values[i]), int(i)) for i in s.remaining]
        chosen = select(s.remaining_capacity, items)
        return None if chosen is None else int(chosen[2])
    return decide


def _obp(priority):
    def decide(s: ObpState) -> int:
        # Like the usual online packing harness, only bins that fit are scored.
        valid = np.flatnonzero(s.bins >= s.item)
        scores = np.asarray(priority(s.item, s.bins[valid]), dtype=float)
        return int(valid[int(np.argmax(scores))])
    return decide


REFERENCES: dict[str, tuple[Task, Callable]] = {
    "funsearch_tsp_nn": (Task.TSP, _tsp(select_tsp_nn)),
    "lhs_tsp": (Task.TSP, _tsp(select_tsp_lhs)),
    "lhs_cvrp": (Task.CVRP, _cvrp(select_cvrp_lhs)),
    "lhs_knapsack": (Task.KNAPSACK, _knapsack(select_knapsack_lhs)),
    "eoh_knapsack_ratio": (Task.KNAPSACK, _knapsack(select_knapsack_eoh)),
    "ratio_greedy_knapsack": (Task.KNAPSACK, _knapsack(select_knapsack_ratio)),
    "lhs_obp": (Task.OBP, _obp(priority_obp_lhs)),
    "best_fit_obp": (Task.OBP, _obp(priority_best_fit)),
    "first_fit_obp": (Task.OBP, _obp(priority_first_fit)),
}
