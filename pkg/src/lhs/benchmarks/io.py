"""Instance JSON files and per-instance results CSV."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable

import numpy as np

from ..dsl.vocab import Task
from .evaluate import Score
from .instances import CvrpInstance, Family, Instance, KnapsackInstance, ObpInstance, TspInstance

RESULT_FIELDS = ("policy_id", "task", "instance_id", "cost", "wall_ms", "valid")


def instance_to_json(inst: Instance) -> dict:
    out: dict = {"task": inst.task.value, "seed": inst.seed}
    if isinstance(inst, TspInstance):
        out["coords"] = inst.coords.tolist()
    elif isinstance(inst, CvrpInstance):
        out.update(depot=inst.depot.tolist(), customers=inst.customers.tolist(),
                   demands=inst.demands.tolist(), capacity=int(inst.capacity))
    elif isinstance(inst, KnapsackInstance):
        out.update(items=[list(t) for t in inst.items], capacity=int(inst.capacity),
                   family=inst.family.value)
    else:
        out.update(items=inst.sizes.tolist(), capacity=int(inst.capacity))
    return out


def instance_from_json(obj: dict) -> Instance:
    task = Task(obj["task"])
    seed = obj.get("seed")
    if task is Task.TSP:
        return TspInstance(np.asarray(obj["coords"], dtype=float), seed)
    if task is Task.CVRP:
        return CvrpInstance(np.asarray(obj["depot"], dtype=float), np.asarray(obj["customers"], dtype=float),
                            np.asarray(obj["demands"], dtype=np.int64), int(obj["capacity"]), seed)
    if task is Task.KNAPSACK:
        items = sorted(obj["items"], key=lambda t: t[2])
        if [t[2] for t in items] != list(range(len(items))):
            raise ValueError("knapsack item indices must be unique and dense")
        w = np.array([t[0] for t in items], dtype=np.int64)
        v = np.array([t[1] for t in items], dtype=np.int64)
        return KnapsackInstance(w, v, int(obj["capacity"]), Family(obj["family"]), seed)
    return ObpInstance(np.asarray(obj["items"], dtype=np.int64), int(obj["capacity"]), seed)


def save_instances(path: str | Path, instances: Iterable[Instance]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([instance_to_json(i) for i in instances], fh)


def load_instances(path: str | Path) -> list[Instance]:
    with open(path, encoding="utf-8") as fh:
        return [instance_from_json(o) for o in json.load(fh)]


def score_rows(policy_id: str, task: Task, score: Score) -> list[dict]:
    return [{"policy_id": policy_id, "task": task.value, "instance_id": r.index,
             "cost": "" if r.cost is None else repr(r.cost), "wall_ms": f"{r.wall_ms:.3f}",
             "valid": int(r.valid)} for r in score.per_instance]


def write_results_csv(path: str | Path, rows: Iterable[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=RESULT_FIELDS)
        w.writeheader()
        w.writerows(rows)
