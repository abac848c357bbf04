"""Three-tier program augmentation: syntactic, parametric, behavioral."""

from __future__ import annotations

from enum import Enum

import numpy as np

from .program import Program, Tree, from_tree
from .vocab import COMMUTATIVE, CONSTANT_GRID, CONSTANT_VALUE, CONSTANTS, FEATURES, MAX_TOKENS, task_features


class Strategy(str, Enum):
    SYNTACTIC = "syntactic"
    PARAMETRIC = "parametric"
    BEHAVIORAL = "behavioral"


SWAP_AGGREGATION = {"MIN": "MAX", "MAX": "MIN", "ADD": "SUB", "SUB": "ADD"}


def _nodes(tree: Tree, path: tuple = ()):
    yield path, tree
    for i, child in enumerate(tree[1:]):
        yield from _nodes(child, path + (i,))


def _replace(tree: Tree, path: tuple, new: Tree) -> Tree:
    if not path:
        return new
    i = path[0]
    children = list(tree[1:])
    children[i] = _replace(children[i], path[1:], new)
    return (tree[0], *children)


def _pick(rng: np.random.Generator, options: dict[str, list]):
    kinds = [k for k, sites in options.items() if sites]
    if not kinds:
        return None, None
    kind = kinds[rng.integers(len(kinds))]
    sites = options[kind]
    return kind, sites[rng.integers(len(sites))]


def _syntactic(tree: Tree, size: int, rng) -> Tree | None:
    nodes = list(_nodes(tree))
    room = size + 2 <= MAX_TOKENS
    options = {
        "swap": [(p, n) for p, n in nodes if n[0] in COMMUTATIVE and n[1] != n[2]],
        "neg_elim": [(p, n) for p, n in nodes if n[0] == "NEG" and n[1][0] == "NEG"],
        "neg_insert": nodes if room else [],
        "mul_wrap": nodes if room else [],
    }
    kind, site = _pick(rng, options)
    if kind is None:
        return None
    path, node = site
    if kind == "swap":
        new = (node[0], node[2], node[1])
    elif kind == "neg_elim":
        new = node[1][1]
    elif kind == "neg_insert":
        new = ("NEG", ("NEG", node))
    else:
        new = ("MUL", ("C1.0",), node)
    return _replace(tree, path, new)


def _parametric(tree: Tree, size: int, rng) -> Tree | None:
    nodes = list(_nodes(tree))
    consts = [(p, n) for p, n in nodes if n[0] in CONSTANT_VALUE]
    if consts:
        path, node = consts[rng.integers(len(consts))]
        i = CONSTANT_GRID.index(CONSTANT_VALUE[node[0]])
        neighbours = [j for j in (i - 1, i + 1) if 0 <= j < len(CONSTANT_GRID)]
        j = neighbours[rng.integers(len(neighbours))]
        return _replace(tree, path, (CONSTANTS[j],))
    if size + 2 > MAX_TOKENS:
        return None
    # no constant to move: add a weight next to 1.0 (wrap with MUL C1.0, then step it)
    path, node = nodes[rng.integers(len(nodes))]
    weight = ("C0.5", "C2.0")[rng.integers(2)]
    return _replace(tree, path, ("MUL", (weight,), node))


def _behavioral(tree: Tree, task, rng) -> Tree | None:
    nodes = list(_nodes(tree))
    feats = task_features(task)
    options = {
        "feature": [(p, n) for p, n in nodes if n[0] in FEATURES] if len(feats) > 1 else [],
        "aggregation": [(p, n) for p, n in nodes if n[0] in SWAP_AGGREGATION],
    }
    kind, site = _pick(rng, options)
    if kind is None:
        return None
    path, node = site
    if kind == "feature":
        others = [f for f in feats if f != node[0]]
        return _replace(tree, path, (others[rng.integers(len(others))],))
    return _replace(tree, path, (SWAP_AGGREGATION[node[0]], *node[1:]))


def augment(program: Program, strategy: Strategy | str, rng: np.random.Generator) -> Program:
    """Rewrite one site of ``program``; returns it unchanged when no site exists."""
    strategy = Strategy(strategy)
    if strategy is Strategy.SYNTACTIC:
        new = _syntactic(program.tree, len(program), rng)
    elif strategy is Strategy.PARAMETRIC:
        new = _parametric(program.tree, len(program), rng)
    else:
        new = _behavioral(program.tree, program.task, rng)
    if new is None:
        return program
    return from_tree(new, program.task)
