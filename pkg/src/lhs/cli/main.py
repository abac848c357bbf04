"""Command-line entry point: corpus, train, search, eval, export-embeddings, report."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import shutil
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from ..benchmarks import Policy, eval_benchmark, evaluate, probe_validate, reference_heuristic, search_benchmark
from ..benchmarks.io import score_rows, write_results_csv
from ..benchmarks.suites import EVAL_SIZES
from ..diffmath import ContractError, NumericsError
from ..dsl import ParseError, Task, parse, read_corpus, write_corpus
from ..flow import FlowConfig, flow_forward
from ..latent.train import AutoencoderConfig, MapperConfig
from ..pipeline.corpus import CorpusConfig, build_corpus, scored
from ..pipeline.stages import (
    MissingArtifact,
    load_autoencoder,
    load_flow,
    load_mapper,
    load_surrogate,
    save_autoencoder,
    save_flow,
    save_module,
    save_surrogate,
    stage_autoencoder,
    stage_flow,
    stage_mapper,
    stage_surrogate,
)
from ..search import SearchConfig, SearchModels, Variant, run_search, write_report
from ..surrogate import SurrogateConfig
from ..training import TrainingError
from .config import ConfigError, RunConfig, load_config

EXIT_OK, EXIT_CONFIG, EXIT_MISSING, EXIT_RUNTIME = 0, 2, 3, 4
STAGES = ("autoencoder", "flow", "surrogate", "mapper")


class Layout:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.corpus = self.root / "corpus" / "corpus.jsonl"
        self.ckpt = self.root / "checkpoints"
        self.runs = self.root / "runs"

    def checkpoint(self, name: str) -> Path:
        return self.ckpt / f"{name}.ckpt"

    def surrogate(self, task: str, raw: bool) -> Path:
        return self.checkpoint(f"surrogate-{'raw-' if raw else ''}{task}")


class Run:
    """A run directory: config snapshot, outputs, then a completion marker."""

    def __init__(self, layout: Layout, cfg: RunConfig, command: str, extra: str = ""):
        self.id = cfg.run_id(command, extra)
        self.dir = layout.runs / f"{command}-{self.id}"
        self.cfg = cfg

    @property
    def complete(self) -> bool:
        return (self.dir / "DONE").exists()

    def start(self) -> None:
        if self.dir.exists():
            shutil.rmtree(self.dir)  # an incomplete earlier attempt
        self.dir.mkdir(parents=True)
        (self.dir / "config.txt").write_text(self.cfg.snapshot())

    def finish(self) -> None:
        (self.dir / "DONE").write_text(self.cfg.config_hash + "\n")


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=str))


def _file_digest(*paths: Path) -> str:
    h = hashlib.sha256()
    for p in paths:
        h.update(p.read_bytes())
    return h.hexdigest()[:16]


def _need(path: Path, stage: str) -> Path:
    if not path.exists():
        raise MissingArtifact(stage, path)
    return path


def _corpus(layout: Layout):
    return read_corpus(_need(layout.corpus, "corpus"))


def _tasks(spec: str) -> tuple[Task, ...]:
    if spec.upper() == "ALL":
        return tuple(Task)
    try:
        return tuple(Task(t.strip().upper()) for t in spec.split(","))
    except ValueError:
        raise ConfigError(f"bad corpus_tasks {spec!r}") from None


def _search_bench(cfg: RunConfig, task: Task):
    if task is Task.OBP:
        return search_benchmark(task, size=cfg.obp_search_items)
    return search_benchmark(task)


# -- commands ----------------------------------------------------------------------

def cmd_corpus(cfg: RunConfig, layout: Layout) -> Path:
    run = Run(layout, cfg, "corpus")
    if not run.complete:
        run.start()
        tasks = _tasks(cfg.corpus_tasks)
        benches = {t: _search_bench(cfg, t) for t in tasks}
        ccfg = CorpusConfig(tasks, cfg.corpus_seeds_per_task, cfg.corpus_factor, cfg.seed,
                            parallelism=cfg.parallelism)
        entries = build_corpus(ccfg, benches)
        write_corpus(run.dir / "corpus.jsonl", entries)
        counts = {t.value: sum(e.program.task is t for e in entries) for t in tasks}
        _dump(run.dir / "report.json", {"programs": len(entries), "per_task": counts,
                                        "invalid": sum(e.score is None for e in entries),
                                        "config_hash": cfg.config_hash})
        run.finish()
    layout.corpus.parent.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(run.dir / "corpus.jsonl", layout.corpus)
    print(f"corpus run {run.id}: {layout.corpus}")
    return run.dir


def cmd_train(cfg: RunConfig, layout: Layout, stage: str) -> Path:
    if stage not in STAGES:
        raise ConfigError(f"unknown stage {stage!r}; choose from {', '.join(STAGES)}")
    raw = stage == "surrogate" and cfg.variant == Variant.NO_FLOW.value
    target = layout.surrogate(cfg.task, raw) if stage == "surrogate" else layout.checkpoint(stage)
    # prerequisites first, so a missing stage is reported before any work
    entries = _corpus(layout)
    if stage != "autoencoder":
        ae = load_autoencoder(layout.checkpoint("autoencoder"))
    if stage == "surrogate" and not raw:
        flow = load_flow(layout.checkpoint("flow"))
    inputs = [layout.corpus]
    if stage != "autoencoder":
        inputs.append(layout.checkpoint("autoencoder"))
    if stage == "surrogate" and not raw:
        inputs.append(layout.checkpoint("flow"))
    extra = f"{stage}:{'raw' if raw else ''}:{cfg.task if stage == 'surrogate' else ''}:{_file_digest(*inputs)}"
    run = Run(layout, cfg, "train", extra)
    if not run.complete:
        run.start()
        meta = {"config_hash": cfg.config_hash, "run_id": run.id}
        ckpt = run.dir / target.name
        t0 = time.perf_counter()
        if stage == "autoencoder":
            res = stage_autoencoder(entries, AutoencoderConfig(cfg.ae_epochs, cfg.ae_batch, cfg.ae_lr,
                                                               latent_noise=cfg.latent_noise), cfg.seed)
            save_autoencoder(ckpt, res, meta)
            report = res.report
        elif stage == "flow":
            fcfg = FlowConfig(cfg.flow_epochs, cfg.flow_batch, noise=cfg.flow_noise)
            flow, report = stage_flow(ae.encoder, [e.program for e in entries], fcfg, cfg.seed)
            save_flow(ckpt, flow, meta)
        elif stage == "surrogate":
            scfg = SurrogateConfig(cfg.surrogate_epochs, cfg.surrogate_batch, tau=cfg.tau, cap=cfg.pair_cap)
            model, report = stage_surrogate(entries, Task(cfg.task), ae.encoder, None if raw else flow,
                                            scfg, cfg.seed)
            save_surrogate(ckpt, model, meta)
        else:
            mapper, report = stage_mapper(entries, ae, MapperConfig(cfg.mapper_epochs, cfg.mapper_batch),
                                          cfg.seed)
            save_module(ckpt, mapper, meta)
        report["config_hash"] = cfg.config_hash
        report["wall_time"] = time.perf_counter() - t0
        _dump(run.dir / "report.json", report)
        run.finish()
    target.parent.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(run.dir / target.name, target)
    print(f"train {stage} run {run.id}: {target}")
    return run.dir


def load_models(cfg: RunConfig, layout: Layout, variant: Variant) -> SearchModels:
    ae = load_autoencoder(layout.checkpoint("autoencoder"))
    mapper = load_mapper(layout.checkpoint("mapper"))
    flow = surrogate = None
    if variant is Variant.NO_FLOW:
        surrogate = load_surrogate(layout.surrogate(cfg.task, True), "surrogate (latent space)")
    else:
        flow = load_flow(layout.checkpoint("flow"))
        if variant is Variant.LHS:
            surrogate = load_surrogate(layout.surrogate(cfg.task, False))
    return SearchModels(ae.encoder, ae.decoder, mapper, flow, surrogate)


def search_config(cfg: RunConfig, seed: int) -> SearchConfig:
    return SearchConfig(cfg.budget, cfg.candidates, cfg.steps, cfg.eta, cfg.pool, cfg.temperature,
                        cfg.top_p, seed, Variant(cfg.variant), parallelism=cfg.parallelism)


def summarize(reports) -> dict:
    best = [r.best.y for r in reports]
    return {
        "task": reports[0].task, "variant": reports[0].variant, "seeds": [r.seed for r in reports],
        "mean_best_objective": statistics.fmean(best),
        "std_best_objective": statistics.stdev(best) if len(best) > 1 else 0.0,
        "mean_success_rate": statistics.fmean(r.success_rate for r in reports),
        "improved_seeds": sum(r.improved for r in reports),
    }


def cmd_search(cfg: RunConfig, layout: Layout) -> Path:
    variant = Variant(cfg.variant)
    task = Task(cfg.task)
    models = load_models(cfg, layout, variant)
    used = sorted(p for p in layout.ckpt.glob("*.ckpt"))
    run = Run(layout, cfg, "search", _file_digest(*used))
    if run.complete:
        print(f"search run {run.id} already complete: {run.dir}")
        return run.dir
    run.start()
    bench = _search_bench(cfg, task)
    reports = []
    for seed in cfg.seeds:
        rep = run_search(task, search_config(cfg, seed), models, bench)
        write_report(rep, run.dir / f"seed-{seed}")
        reports.append(rep)
        print(f"seed {seed}: best {rep.best.y:.4f} ({' '.join(rep.best.program.tokens)}), "
              f"success {rep.success_rate:.2f}")
    summary = summarize(reports)
    summary["config_hash"] = cfg.config_hash
    _dump(run.dir / "summary.json", summary)
    with open(run.dir / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["task", "variant", "n_seeds", "mean", "std", "success_rate"])
        w.writerow([summary["task"], summary["variant"], len(reports), repr(summary["mean_best_objective"]),
                    repr(summary["std_best_objective"]), repr(summary["mean_success_rate"])])
    run.finish()
    print(f"{task.value} {variant.value}: {summary['mean_best_objective']:.4f} "
          f"± {summary['std_best_objective']:.4f} -> {run.dir}")
    return run.dir


def resolve_policy(spec: str, task: Task, layout: Layout) -> Policy:
    if not spec:
        raise ConfigError("eval needs --policy (reference name, corpus id, or token sequence)")
    try:
        pol = reference_heuristic(spec)
    except KeyError:
        pol = None
    if pol is not None:
        if pol.task is not task:
            raise ConfigError(f"policy {spec} is for {pol.task.value}, not {task.value}")
        return pol
    if layout.corpus.exists() and " " not in spec.strip():
        for e in read_corpus(layout.corpus):
            if e.program.id == spec:
                if e.program.task is not task:
                    raise ConfigError(f"corpus program {spec} is for {e.program.task.value}")
                return Policy.from_program(e.program)
    try:
        program = parse(spec.split(), task)
    except ParseError as exc:
        raise ConfigError(f"unknown policy or invalid token sequence {spec!r}: {exc}") from None
    policy = Policy.from_program(program)
    if not probe_validate(policy):
        raise ConfigError(f"program {spec!r} fails probe validation")
    return policy


def cmd_eval(cfg: RunConfig, layout: Layout) -> Path:
    task = Task(cfg.task)
    policy = resolve_policy(cfg.policy, task, layout)
    count = cfg.count or EVAL_SIZES[task].count
    size = cfg.size or EVAL_SIZES[task].size
    if cfg.family and task is not Task.KNAPSACK:
        raise ConfigError("family applies to KNAPSACK only")
    try:
        bench = eval_benchmark(task, count, size, family=cfg.family.upper() or None)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    run = Run(layout, cfg, "eval")
    score = evaluate(policy, bench, cfg.parallelism)
    if not run.complete:
        run.start()
        write_results_csv(run.dir / "results.csv", score_rows(policy.id, task, score))
        with open(run.dir / "aggregate.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["policy_id", "task", "instances", "size", "mean_objective", "std_objective",
                        "valid", "wall_time"])
            std = float(np.std(score.costs, ddof=1)) if len(score.costs) > 1 else 0.0
            w.writerow([policy.id, task.value, count, size, repr(score.y), repr(std), score.valid,
                        f"{score.wall_time:.3f}"])
        run.finish()
    print(f"{policy.id} on {task.value} {count}x{size}: mean {score.y:.4f} valid={score.valid} -> {run.dir}")
    return run.dir


def cmd_export(cfg: RunConfig, layout: Layout) -> Path:
    entries = _corpus(layout)
    ae = load_autoencoder(layout.checkpoint("autoencoder"))
    flow = load_flow(layout.checkpoint("flow"))
    rows = scored(entries)
    z = ae.encoder.encode([e.program for e in rows])
    u = flow_forward(flow, z)[0]
    run = Run(layout, cfg, "export")
    run.start()
    with open(run.dir / "embeddings.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["program_id", "task", "score", *[f"z{i}" for i in range(z.shape[1])],
                    *[f"u{i}" for i in range(u.shape[1])]])
        for e, zr, ur in zip(rows, z, u):
            w.writerow([e.program.id, e.program.task.value, repr(e.score), *map(repr, zr), *map(repr, ur)])
    _dump(run.dir / "report.json", {"rows": len(rows), "mean_norm_u": float(np.linalg.norm(u, axis=1).mean()),
                                    "config_hash": cfg.config_hash})
    run.finish()
    print(f"exported {len(rows)} rows -> {run.dir / 'embeddings.csv'}")
    return run.dir


def cmd_report(cfg: RunConfig, layout: Layout) -> Path:
    from .report import render_report

    out = render_report(layout.runs, layout.root / "report")
    print(f"report -> {out}")
    return out


# -- entry point ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lhs", description="Latent-space search over DSL heuristics.")
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file")
    common.add_argument("--out", help="results directory")
    common.add_argument("--task")
    common.add_argument("--variant")
    common.add_argument("--seed", type=str, help="training / corpus seed")
    common.add_argument("--seeds", help="search seeds, e.g. 1,2,3 or 1..5")
    common.add_argument("--budget")
    common.add_argument("--parallelism")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key (applied last, in order)")
    sub.add_parser("corpus", parents=[common], help="sample, augment, dedupe and score programs")
    tr = sub.add_parser("train", parents=[common], help="train one stage")
    tr.add_argument("--stage", required=True, choices=STAGES)
    sub.add_parser("search", parents=[common], help="run the search for every seed")
    ev = sub.add_parser("eval", parents=[common], help="evaluate a policy on a benchmark")
    ev.add_argument("--policy")
    ev.add_argument("--count")
    ev.add_argument("--size")
    ev.add_argument("--family")
    sub.add_parser("export-embeddings", parents=[common], help="write latent and prior coordinates")
    sub.add_parser("report", parents=[common], help="render figures and CSV from finished runs")
    return ap


def _overrides(args) -> list[tuple[str, str]]:
    pairs = []
    for key in ("out", "task", "variant", "seed", "seeds", "budget", "parallelism", "policy", "count",
                "size", "family"):
        v = getattr(args, key, None)
        if v is not None:
            pairs.append((key, str(v)))
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        pairs.append((k, v))
    return pairs


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
        layout = Layout(cfg.out)
        if args.command == "corpus":
            cmd_corpus(cfg, layout)
        elif args.command == "train":
            cmd_train(cfg, layout, args.stage)
        elif args.command == "search":
            cmd_search(cfg, layout)
        elif args.command == "eval":
            cmd_eval(cfg, layout)
        elif args.command == "export-embeddings":
            cmd_export(cfg, layout)
        else:
            cmd_report(cfg, layout)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifact as exc:
        print(f"missing prerequisite: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (TrainingError, NumericsError, ContractError, RuntimeError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
