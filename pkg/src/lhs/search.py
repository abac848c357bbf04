"""Outer search loop: seed selection, prior-space ascent, inversion, mapping, decoding, scoring."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .benchmarks import Benchmark, Policy, evaluate, probe_validate
from .dsl import ParseError, Program, Task, parse
from .dsl.vocab import as_task
from .flow import Flow, flow_forward, flow_inverse
from .latent.decode import decode
from .latent.models import Decoder, Encoder, Mapper
from .latent.tokens import context_batch
from .surrogate import Surrogate, surrogate_grad

# Single-program starting points, one per task (nearest neighbour, best fit, ratio greedy).
REFERENCE_PROGRAMS = {
    Task.TSP: ("NEG", "F0"),
    Task.CVRP: ("NEG", "F0"),
    Task.KNAPSACK: ("F2",),
    Task.OBP: ("NEG", "F1"),
}


def reference_program(task: Task | str) -> Program:
    task = as_task(task)
    return parse(REFERENCE_PROGRAMS[task], task)


class Variant(str, Enum):
    LHS = "LHS"
    NO_FLOW = "NO_FLOW"
    NO_GRAD = "NO_GRAD"


@dataclass
class SearchConfig:
    budget: int = 100
    candidates: int = 5
    steps: int = 5
    eta: float = 0.3
    pool: int = 10
    temperature: float = 0.7
    top_p: float = 0.9
    seed: int = 0
    variant: Variant = Variant.LHS
    family: int = 0
    init_population: int = 10
    init_attempts: int = 50
    # latent jitter for initial decodes once plain decodes of the reference stop yielding new programs
    init_sigma: float = 0.5
    max_halvings: int = 3
    parallelism: int = 1


@dataclass
class SearchModels:
    encoder: Encoder
    decoder: Decoder
    mapper: Mapper
    flow: Flow | None = None
    surrogate: Surrogate | None = None

    def to_prior(self, z: np.ndarray) -> np.ndarray:
        if self.flow is None:
            return np.array(z, dtype=np.float64)
        return flow_forward(self.flow, np.atleast_2d(z))[0].reshape(np.shape(z))

    def from_prior(self, u: np.ndarray) -> np.ndarray:
        if self.flow is None:
            return np.array(u, dtype=np.float64)
        return flow_inverse(self.flow, np.atleast_2d(u)).reshape(np.shape(u))


@dataclass
class ScoredEntry:
    program: Program
    s: float
    y: float
    z: np.ndarray
    u: np.ndarray
    origin: str
    round: int
    parents: tuple[str, ...] = ()
    valid: bool = True

    def row(self) -> dict:
        return {"id": self.program.id, "tokens": " ".join(self.program.tokens), "s": self.s,
                "y": self.y, "origin": self.origin, "round": self.round, "parents": list(self.parents)}


@dataclass
class SearchReport:
    task: str
    variant: str
    seed: int
    best: ScoredEntry
    initial_best: float
    decodes: int
    valid_decodes: int
    curve: list[float]
    wall_time: float
    database: list[ScoredEntry] = field(default_factory=list)
    log: list[dict] = field(default_factory=list)

    @property
    def success_rate(self) -> float:
        return self.valid_decodes / self.decodes if self.decodes else 0.0

    @property
    def improved(self) -> bool:
        return self.best.s > self.initial_best

    def summary(self) -> dict:
        return {
            "task": self.task, "variant": self.variant, "seed": self.seed,
            "best_id": self.best.program.id, "best_tokens": " ".join(self.best.program.tokens),
            "best_s": self.best.s, "best_objective": self.best.y, "initial_best_s": self.initial_best,
            "improved": self.improved, "decodes": self.decodes, "valid_decodes": self.valid_decodes,
            "success_rate": self.success_rate, "curve": self.curve, "wall_time": self.wall_time,
        }


# -- building blocks --------------------------------------------------------------

def softmax_draws(scores: Sequence[float], k: int, rng: np.random.Generator) -> list[int]:
    """k indices without replacement, each draw proportional to exp(score), renormalized."""
    s = np.asarray(scores, dtype=np.float64)
    alive = list(range(len(s)))
    out = []
    for _ in range(min(k, len(s))):
        w = np.exp(s[alive] - s[alive].max())
        pick = int(np.searchsorted(np.cumsum(w / w.sum()), rng.random(), side="right"))
        pick = min(pick, len(alive) - 1)
        out.append(alive.pop(pick))
    return out


def top_pool(db: Sequence[ScoredEntry], pool: int) -> list[ScoredEntry]:
    """Best ``pool`` distinct valid programs; ties keep insertion order."""
    seen, uniq = set(), []
    for e in db:
        if e.valid and e.program.id not in seen:
            seen.add(e.program.id)
            uniq.append(e)
    order = sorted(range(len(uniq)), key=lambda i: (-uniq[i].s, i))
    return [uniq[i] for i in order[:pool]]


def select_seeds(db: Sequence[ScoredEntry], pool: int, k: int, rng: np.random.Generator) -> list[ScoredEntry]:
    top = top_pool(db, pool)
    return [top[i] for i in softmax_draws([e.s for e in top], k, rng)]


def ascend(u0: np.ndarray, value_grad: Callable[[np.ndarray], tuple[float, np.ndarray]], steps: int,
           eta: float, max_halvings: int = 3) -> tuple[list[np.ndarray], list[float]]:
    """Fixed-step gradient ascent with step halving; the returned values never decrease."""
    u = np.array(u0, dtype=np.float64)
    f, g = value_grad(u)
    traj, values = [u.copy()], [f]
    for _ in range(steps):
        step = eta
        nxt, fn, gn = u, f, g
        for _ in range(max_halvings + 1):
            cand = u + step * g
            fc, gc = value_grad(cand)
            if fc >= f:
                nxt, fn, gn = cand, fc, gc
                break
            step *= 0.5
        u, f, g = nxt, fn, gn
        traj.append(u.copy())
        values.append(f)
    return traj, values


def midpoint_pairs(pool: Sequence[ScoredEntry], k: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Up to k distinct index pairs (a < b) with distinct prior points, sampled uniformly."""
    pairs = [(a, b) for a in range(len(pool)) for b in range(a + 1, len(pool))
             if not np.array_equal(pool[a].u, pool[b].u)]
    if not pairs:
        return []
    pick = rng.choice(len(pairs), size=min(k, len(pairs)), replace=False)
    return [pairs[i] for i in pick]


# -- the search ---------------------------------------------------------------------

class Searcher:
    def __init__(self, task: Task | str, models: SearchModels, bench: Benchmark, cfg: SearchConfig):
        self.task = as_task(task)
        self.models = models
        self.bench = bench
        self.cfg = cfg
        self.variant = Variant(cfg.variant)
        if self.variant is not Variant.NO_GRAD and models.surrogate is None:
            raise ValueError(f"variant {self.variant.value} needs a surrogate")
        if self.variant is Variant.NO_FLOW and models.flow is not None:
            raise ValueError("NO_FLOW runs without a flow")
        self.rng = np.random.default_rng(cfg.seed)
        self.db: list[ScoredEntry] = []
        self.log: list[dict] = []
        self.budget = cfg.budget
        self.decodes = 0
        self.valid_decodes = 0
        self._scores: dict[str, tuple[float, float] | None] = {}

    # scoring --------------------------------------------------------------------
    def _score(self, program: Program) -> tuple[float, float] | None:
        if program.id in self._scores:
            return self._scores[program.id]
        policy = Policy.from_program(program)
        out = None
        if probe_validate(policy):
            sc = evaluate(policy, self.bench)
            if sc.valid and math.isfinite(sc.s):
                out = (sc.s, sc.y)
        self._scores[program.id] = out
        return out

    def _score_many(self, programs: list[Program | None]) -> list[tuple[float, float] | None]:
        todo = [p for p in programs if p is not None]
        if self.cfg.parallelism > 1 and len(todo) > 1:
            with ThreadPoolExecutor(self.cfg.parallelism) as pool:
                list(pool.map(self._score, todo))
        return [self._score(p) if p is not None else None for p in programs]

    def _entry(self, program: Program, s: float, y: float, origin: str, rnd: int,
               parents: tuple[str, ...]) -> ScoredEntry:
        z = self.models.encoder.encode([program])[0]
        return ScoredEntry(program, s, y, z, self.models.to_prior(z), origin, rnd, parents)

    def _decode(self, zs: np.ndarray, temperature: float) -> list[Program | None]:
        ctx = context_batch([self.task] * len(zs), [self.cfg.family] * len(zs))
        h = self.models.mapper.map(np.atleast_2d(zs))
        outs = decode(self.models.decoder, ctx, h, temperature, self.cfg.top_p, self.rng)
        progs: list[Program | None] = []
        for toks in outs:
            try:
                progs.append(parse(toks, self.task))
            except ParseError:
                progs.append(None)
        return progs

    # initialization ---------------------------------------------------------------
    def initialize(self) -> None:
        ref = reference_program(self.task)
        scored = self._score(ref)
        if scored is None:
            raise RuntimeError(f"reference program for {self.task.value} failed to evaluate")
        root = self._entry(ref, *scored, origin="seed", rnd=0, parents=())
        self.db.append(root)
        have = {ref.id}
        attempts = 0
        while len(self.db) < self.cfg.init_population and attempts < self.cfg.init_attempts:
            n = min(self.cfg.init_population - len(self.db), self.cfg.init_attempts - attempts)
            zs = np.repeat(root.z[None], n, axis=0)
            if attempts > 0:
                # Same draws for every variant: the jitter lives in latent space, not prior space.
                zs = zs + self.cfg.init_sigma * self.rng.normal(size=zs.shape)
            attempts += n
            progs = self._decode(zs, self.cfg.temperature)
            fresh = [p if p is not None and p.id not in have else None for p in progs]
            for p, sc in zip(fresh, self._score_many(fresh)):
                if p is None or sc is None or p.id in have:
                    continue
                have.add(p.id)
                self.db.append(self._entry(p, *sc, origin="seed", rnd=0, parents=(ref.id,)))

    # rounds -----------------------------------------------------------------------
    def _proposals(self, k: int) -> list[tuple[np.ndarray, tuple[str, ...], dict]]:
        """Latent targets z* for this round, with parent ids and trace info."""
        cfg = self.cfg
        if self.variant is Variant.NO_GRAD:
            pool = top_pool(self.db, cfg.pool)
            out = []
            for a, b in midpoint_pairs(pool, k, self.rng):
                u = 0.5 * pool[a].u + 0.5 * pool[b].u
                out.append((self.models.from_prior(u), (pool[a].program.id, pool[b].program.id),
                            {"u_norm": float(np.linalg.norm(u))}))
            return out
        out = []
        sur = self.models.surrogate
        for seed in select_seeds(self.db, cfg.pool, k, self.rng):
            traj, values = ascend(seed.u, lambda u: surrogate_grad(sur, u), cfg.steps, cfg.eta,
                                  cfg.max_halvings)
            z_star = self.models.from_prior(traj[-1])
            out.append((z_star, (seed.program.id,),
                        {"ascent_norms": [float(np.linalg.norm(t - traj[0])) for t in traj],
                         "surrogate": values}))
        return out

    def run_round(self, rnd: int) -> list[ScoredEntry]:
        k = min(self.cfg.candidates, self.budget)
        if k <= 0:
            return []
        proposals = self._proposals(k)
        if not proposals:
            return []
        zs = np.stack([p[0] for p in proposals])
        programs = self._decode(zs, self.cfg.temperature)
        self.budget -= len(programs)
        self.decodes += len(programs)
        scores = self._score_many(programs)
        known = {e.program.id for e in self.db}
        added = []
        for (z_star, parents, trace), prog, sc in zip(proposals, programs, scores):
            valid = sc is not None
            self.valid_decodes += int(valid)
            rec = {"round": rnd, "seeds": list(parents), **trace,
                   "tokens": " ".join(prog.tokens) if prog is not None else None,
                   "valid": valid, "score": sc[0] if valid else None,
                   "budget_remaining": self.budget}
            self.log.append(rec)
            if valid and prog.id not in known:
                known.add(prog.id)
                e = self._entry(prog, *sc, origin=self.variant.value.lower(), rnd=rnd, parents=parents)
                self.db.append(e)
                added.append(e)
        return added

    def best_so_far(self) -> ScoredEntry:
        return max((e for e in self.db if e.valid), key=lambda e: e.s)

    def run(self) -> SearchReport:
        t0 = time.perf_counter()
        self.initialize()
        initial_best = self.best_so_far().s
        curve = [initial_best]
        rnd = 0
        while self.budget > 0:
            rnd += 1
            before = self.decodes
            self.run_round(rnd)
            curve.append(self.best_so_far().s)
            if self.decodes == before:
                break  # nothing left to propose
        return SearchReport(self.task.value, self.variant.value, self.cfg.seed, self.best_so_far(),
                            initial_best, self.decodes, self.valid_decodes, curve,
                            time.perf_counter() - t0, list(self.db), list(self.log))


def run_search(task: Task | str, cfg: SearchConfig, models: SearchModels, bench: Benchmark) -> SearchReport:
    return Searcher(task, models, bench, cfg).run()


# -- persistence ----------------------------------------------------------------------

def write_report(report: SearchReport, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report.summary(), indent=2, sort_keys=True))
    with open(out / "search_log.jsonl", "w") as fh:
        for rec in report.log:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    with open(out / "database.jsonl", "w") as fh:
        for e in report.database:
            fh.write(json.dumps(e.row(), sort_keys=True) + "\n")
    with open(out / "best_so_far.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["round", "best_s"])
        for i, v in enumerate(report.curve):
            w.writerow([i, repr(v)])
