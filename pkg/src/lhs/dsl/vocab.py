"""Token inventory of the heuristic expression language.

Ids are dense and fixed: control tokens, operators, feature slots, then the
constant grid. Changing this order invalidates every stored corpus and
checkpoint.
"""

from __future__ import annotations

from enum import Enum


class Task(str, Enum):
    TSP = "TSP"
    CVRP = "CVRP"
    KNAPSACK = "KNAPSACK"
    OBP = "OBP"


TASKS = tuple(Task)

CONTROL = ("PAD", "BOS", "EOS")
PAD, BOS, EOS = 0, 1, 2

ARITY = {
    "ADD": 2, "SUB": 2, "MUL": 2, "DIV": 2, "MIN": 2, "MAX": 2,
    "NEG": 1, "ABS": 1, "EXP": 1, "LOG": 1, "SQRT": 1,
}
OPERATORS = tuple(ARITY)
BINARY = tuple(op for op, n in ARITY.items() if n == 2)
UNARY = tuple(op for op, n in ARITY.items() if n == 1)
COMMUTATIVE = ("ADD", "MUL", "MIN", "MAX")

FEATURES = tuple(f"F{i}" for i in range(8))

CONSTANT_GRID = (-2.0, -1.0, -0.5, -0.2, 0.0, 0.2, 0.5, 1.0, 2.0)
CONSTANTS = tuple(f"C{v}" for v in CONSTANT_GRID)
CONSTANT_VALUE = {tok: v for tok, v in zip(CONSTANTS, CONSTANT_GRID)}

TOKENS = CONTROL + OPERATORS + FEATURES + CONSTANTS
TOKEN_ID = {tok: i for i, tok in enumerate(TOKENS)}
VOCAB_SIZE = len(TOKENS)

MAX_TOKENS = 64

# number of feature columns each task exposes (F0..F{n-1})
FEATURE_COUNT = {Task.TSP: 5, Task.CVRP: 5, Task.KNAPSACK: 4, Task.OBP: 4}

FEATURE_DOC = {
    Task.TSP: ("dist_to_current", "dist_to_start", "mean_dist_to_unvisited",
               "min_dist_to_other_unvisited", "fraction_unvisited"),
    Task.CVRP: ("dist_to_current", "dist_to_depot", "demand", "demand_over_rest_capacity",
                "rest_capacity_after"),
    Task.KNAPSACK: ("weight", "value", "value_over_weight", "weight_over_remaining_capacity"),
    Task.OBP: ("remaining_capacity", "residual_after_placement", "residual_over_capacity",
               "fill_fraction"),
}


def as_task(task: Task | str) -> Task:
    return task if isinstance(task, Task) else Task(str(task).upper())


def task_features(task: Task | str) -> tuple[str, ...]:
    return FEATURES[: FEATURE_COUNT[as_task(task)]]


def is_terminal(token: str) -> bool:
    return token in CONSTANT_VALUE or token in FEATURES
