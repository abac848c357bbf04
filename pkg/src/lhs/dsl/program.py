"""Prefix-notation scoring programs: parsing, serialization, evaluation."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .vocab import (
    ARITY,
    CONSTANT_VALUE,
    FEATURES,
    MAX_TOKENS,
    TOKEN_ID,
    Task,
    as_task,
    task_features,
)

PROTECT_EPS = 1e-6

Tree = tuple  # (token, *children)


class ParseError(ValueError):
    """Token sequence is not a well-formed program for the task."""


class InvalidProgram(ValueError):
    """Program evaluated to a non-finite score on a feasible candidate."""


@dataclass(frozen=True)
class FeatureFrame:
    """Candidates x features matrix observed by a program at one decision."""

    task: Task
    matrix: np.ndarray
    feasible: np.ndarray

    @property
    def n_candidates(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class Program:
    task: Task
    tokens: tuple[str, ...]
    tree: Tree = field(compare=False, repr=False)
    id: str = field(compare=False)

    def __str__(self) -> str:
        return " ".join(self.tokens)

    @property
    def depth(self) -> int:
        return tree_depth(self.tree)

    def __len__(self) -> int:
        return len(self.tokens)


def program_id(task: Task, tokens: Sequence[str]) -> str:
    return hashlib.sha256(f"{task.value}:{' '.join(tokens)}".encode()).hexdigest()[:16]


def tree_depth(tree: Tree) -> int:
    return 1 + max((tree_depth(c) for c in tree[1:]), default=0)


def parse(tokens: Sequence[str] | str, task: Task | str) -> Program:
    task = as_task(task)
    if isinstance(tokens, str):
        tokens = tokens.split()
    tokens = tuple(tokens)
    if not tokens:
        raise ParseError("empty program")
    if len(tokens) > MAX_TOKENS:
        raise ParseError(f"program has {len(tokens)} tokens, limit is {MAX_TOKENS}")
    allowed = set(task_features(task))
    for tok in tokens:
        if tok not in TOKEN_ID:
            raise ParseError(f"unknown token {tok!r}")
        if tok in FEATURES and tok not in allowed:
            raise ParseError(f"feature {tok} is not defined for {task.value}")
        if tok not in ARITY and tok not in CONSTANT_VALUE and tok not in FEATURES:
            raise ParseError(f"control token {tok} inside program")

    pos = 0

    def build() -> Tree:
        nonlocal pos
        if pos >= len(tokens):
            raise ParseError("arity underflow: ran out of operands")
        tok = tokens[pos]
        pos += 1
        return (tok, *(build() for _ in range(ARITY.get(tok, 0))))

    tree = build()
    if pos != len(tokens):
        raise ParseError(f"arity overflow: {len(tokens) - pos} trailing tokens")
    return Program(task, tokens, tree, program_id(task, tokens))


def serialize(tree: Tree) -> tuple[str, ...]:
    out: list[str] = []
    stack = [tree]
    while stack:
        node = stack.pop()
        out.append(node[0])
        stack.extend(reversed(node[1:]))
    return tuple(out)


def from_tree(tree: Tree, task: Task | str) -> Program:
    return parse(serialize(tree), task)


def _protected_den(b: np.ndarray) -> np.ndarray:
    return np.where(b < 0, -1.0, 1.0) * np.maximum(np.abs(b), PROTECT_EPS)


def _eval(node: Tree, cols: dict[str, np.ndarray], n: int) -> np.ndarray:
    tok = node[0]
    if tok in CONSTANT_VALUE:
        return np.full(n, CONSTANT_VALUE[tok])
    if tok in cols:
        return cols[tok]
    args = [_eval(c, cols, n) for c in node[1:]]
    if tok == "ADD":
        return args[0] + args[1]
    if tok == "SUB":
        return args[0] - args[1]
    if tok == "MUL":
        return args[0] * args[1]
    if tok == "DIV":
        return args[0] / _protected_den(args[1])
    if tok == "MIN":
        return np.minimum(args[0], args[1])
    if tok == "MAX":
        return np.maximum(args[0], args[1])
    if tok == "NEG":
        return -args[0]
    if tok == "ABS":
        return np.abs(args[0])
    if tok == "EXP":
        return np.exp(args[0])
    if tok == "LOG":
        return np.log(np.maximum(np.abs(args[0]), PROTECT_EPS))
    if tok == "SQRT":
        return np.sqrt(np.abs(args[0]))
    raise ParseError(f"cannot evaluate token {tok!r}")


def interpret(program: Program, frame: FeatureFrame) -> np.ndarray:
    """Score every candidate row of ``frame``. Pure and deterministic."""
    if program.task != frame.task:
        raise ValueError(f"task mismatch: program {program.task.value}, frame {frame.task.value}")
    n = frame.n_candidates
    cols = {FEATURES[j]: frame.matrix[:, j] for j in range(frame.matrix.shape[1])}
    with np.errstate(all="ignore"):
        return np.asarray(_eval(program.tree, cols, n), dtype=np.float64)


def select(scores: np.ndarray, feasible: np.ndarray) -> int:
    """Argmax over feasible candidates, lowest index on ties."""
    if not feasible.any():
        raise ValueError("no feasible candidate")
    masked = scores[feasible]
    if not np.isfinite(masked).all():
        raise InvalidProgram("non-finite score on a feasible candidate")
    idx = np.flatnonzero(feasible)
    return int(idx[int(np.argmax(masked))])


def choose(program: Program, frame: FeatureFrame) -> int:
    return select(interpret(program, frame), frame.feasible)


def finite_on(program: Program, frames: Sequence[FeatureFrame]) -> bool:
    for frame in frames:
        scores = interpret(program, frame)
        if not np.isfinite(scores[frame.feasible]).all():
            return False
    return True
