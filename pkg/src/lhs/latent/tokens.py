"""Id-level views of programs plus the prompt-family context tokens."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..dsl.program import Program
from ..dsl.vocab import BOS, EOS, MAX_TOKENS, PAD, TOKEN_ID, TOKENS, Task

PAD_ID, BOS_ID, EOS_ID = PAD, BOS, EOS
MAX_POS = MAX_TOKENS + 1  # BOS plus up to 64 program tokens

TASK_ORDER = (Task.TSP, Task.CVRP, Task.KNAPSACK, Task.OBP)

# Context vocabulary for the three prompt families.
CONTEXT_TOKENS = ("FAM_TASK", "FAM_CLASS", "FAM_GENERIC",
                  "TASK_TSP", "TASK_CVRP", "TASK_KNAPSACK", "TASK_OBP",
                  "CLASS_ROUTING", "CLASS_PACKING", "ANY")
CONTEXT_ID = {t: i for i, t in enumerate(CONTEXT_TOKENS)}
FAMILIES = {0: "task", 1: "class", 2: "generic"}
CONTEXT_LEN = 2


def context_ids(task: Task, family: int) -> tuple[int, int]:
    if family == 0:
        return CONTEXT_ID["FAM_TASK"], CONTEXT_ID[f"TASK_{task.value}"]
    if family == 1:
        cls = "CLASS_ROUTING" if task in (Task.TSP, Task.CVRP) else "CLASS_PACKING"
        return CONTEXT_ID["FAM_CLASS"], CONTEXT_ID[cls]
    if family == 2:
        return CONTEXT_ID["FAM_GENERIC"], CONTEXT_ID["ANY"]
    raise ValueError(f"unknown prompt family {family}")


def context_batch(tasks: Sequence[Task], families: Sequence[int]) -> np.ndarray:
    return np.array([context_ids(t, f) for t, f in zip(tasks, families)], dtype=np.int64)


def program_ids(program: Program) -> list[int]:
    return [TOKEN_ID[t] for t in program.tokens]


def teacher_batch(programs: Sequence[Program]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Right-padded decoder inputs (BOS + tokens), targets (tokens + EOS) and a mask."""
    lengths = [len(p) + 1 for p in programs]
    width = max(lengths)
    inputs = np.full((len(programs), width), PAD_ID, dtype=np.int64)
    targets = np.full((len(programs), width), PAD_ID, dtype=np.int64)
    mask = np.zeros((len(programs), width))
    for i, p in enumerate(programs):
        ids = program_ids(p)
        inputs[i, : len(ids) + 1] = [BOS_ID, *ids]
        targets[i, : len(ids) + 1] = [*ids, EOS_ID]
        mask[i, : len(ids) + 1] = 1.0
    return inputs, targets, mask


def ids_to_tokens(ids: Sequence[int]) -> list[str]:
    """Cut at the first EOS; other control tokens are kept for the parser to reject."""
    out = []
    for i in ids:
        if i == EOS_ID:
            break
        out.append(TOKENS[i])
    return out


def length_batches(lengths: Sequence[int], batch_size: int, rng: np.random.Generator,
                   chunk: int = 16) -> list[np.ndarray]:
    """Shuffled mini-batches grouped by similar length to limit padding."""
    order = rng.permutation(len(lengths))
    lengths = np.asarray(lengths)
    batches = []
    span = batch_size * chunk
    for start in range(0, len(order), span):
        block = order[start:start + span]
        block = block[np.argsort(lengths[block], kind="stable")]
        batches.extend(block[i:i + batch_size] for i in range(0, len(block), batch_size))
    perm = rng.permutation(len(batches))
    return [batches[i] for i in perm]
