"""End-to-end acceptance checks.

The learned-pipeline criteria share one session pipeline built through the CLI
command functions with shipped defaults. Set LHS_ACCEPTANCE_CACHE to a
directory to keep its artifacts between sessions; finished runs are reused by
content hash. Each criterion records one PASS/FAIL line in the terminal summary.
"""

from __future__ import annotations

import json
import math
import os
import shutil
import time
from pathlib import Path

import numpy as np
import pytest
from conftest import VERDICTS

from lhs.benchmarks import (
    evaluate,
    eval_benchmark,
    gen_knapsack,
    gen_tsp,
    reference_heuristic,
    rollout,
    search_benchmark,
)
from lhs.benchmarks.oracles import knapsack_optimum, tsp_optimum
from lhs.benchmarks.rollout import Policy
from lhs.cli.config import load_config
from lhs.cli.main import Layout, cmd_corpus, cmd_search, cmd_train, load_models, search_config
from lhs.diffmath import Tensor, gradcheck, sum_
from lhs.dsl import Task, parse, read_corpus, sample_seed_program
from lhs.flow import Flow, flow_forward, flow_inverse, flow_nll, nll_tensor
from lhs.latent import (
    Bottleneck,
    Decoder,
    Encoder,
    Mapper,
    MapperConfig,
    greedy_reconstruction,
    mapper_nll,
    masked_token_nll,
    train_mapper,
)
from lhs.latent.tokens import context_batch, teacher_batch
from lhs.latent.train import split_indices
from lhs.pipeline.stages import load_autoencoder, load_flow, load_mapper
from lhs.search import Variant, run_search, write_report
from lhs.surrogate import (
    Surrogate,
    SurrogateConfig,
    build_pairs,
    make_split,
    pairwise_accuracy,
    surrogate_grad,
    train_surrogate,
)

SQRT_D = math.sqrt(128)


def verdict(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    VERDICTS.append(line)
    print(line)
    assert ok, line


# -- shared pipeline ------------------------------------------------------------------

class Pipeline:
    def __init__(self, root: Path):
        self.root = root
        self.layout = Layout(root)
        self.dirs: dict[str, Path] = {}

    def cfg(self, **over):
        return load_config(None, [("out", str(self.root)), *((k, str(v)) for k, v in over.items())])

    def build(self) -> None:
        base = self.cfg()
        self.dirs["corpus"] = cmd_corpus(base, self.layout)
        for stage in ("autoencoder", "flow", "surrogate", "mapper"):
            self.dirs[stage] = cmd_train(base, self.layout, stage)
        self.dirs["surrogate_raw"] = cmd_train(self.cfg(variant="NO_FLOW"), self.layout, "surrogate")
        for variant in Variant:
            self.dirs[f"search_{variant.value}"] = cmd_search(self.cfg(variant=variant.value), self.layout)

    def report(self, key: str) -> dict:
        name = "summary.json" if key.startswith("search") else "report.json"
        return json.loads((self.dirs[key] / name).read_text())

    def seed_reports(self, variant: Variant) -> list[dict]:
        d = self.dirs[f"search_{variant.value}"]
        return [json.loads(p.read_text()) for p in sorted(d.glob("seed-*/report.json"))]


@pytest.fixture(scope="session")
def pipeline(tmp_path_factory) -> Pipeline:
    cache = os.environ.get("LHS_ACCEPTANCE_CACHE")
    root = Path(cache) if cache else tmp_path_factory.mktemp("acceptance")
    p = Pipeline(root)
    p.build()
    return p


# -- criteria 1-5: benchmark reproduction -------------------------------------------------

def timed_eval(name: str, bench):
    t0 = time.perf_counter()
    score = evaluate(reference_heuristic(name), bench)
    return score, time.perf_counter() - t0


def test_criterion_01_tsp_reference_heuristics():
    bench = eval_benchmark(Task.TSP)
    assert len(bench.instances) == 100 and bench.instances[0].n == 50
    nn, t_nn = timed_eval("funsearch_tsp_nn", bench)
    lhs, t_lhs = timed_eval("lhs_tsp", bench)
    ok = (6.50 <= nn.y <= 7.20 and 6.30 <= lhs.y <= 6.80 and lhs.y < nn.y and t_nn + t_lhs < 60)
    verdict(1, ok, f"nn {nn.y:.3f} in [6.50, 7.20], lhs_tsp {lhs.y:.3f} in [6.30, 6.80], "
                   f"time {t_nn + t_lhs:.1f}s < 60s")


def test_criterion_02_cvrp_reference_heuristic():
    bench = eval_benchmark(Task.CVRP)
    assert len(bench.instances) == 100 and bench.instances[0].capacity == 40
    score, t = timed_eval("lhs_cvrp", bench)
    verdict(2, 13.0 <= score.y <= 14.3 and t < 120, f"lhs_cvrp {score.y:.3f} in [13.0, 14.3], time {t:.1f}s < 120s")


def test_criterion_03_obp_reference_heuristic():
    bench = eval_benchmark(Task.OBP)
    assert len(bench.instances) == 10 and len(bench.instances[0].sizes) == 5000
    lhs, _ = timed_eval("lhs_obp", bench)
    ff, _ = timed_eval("first_fit_obp", bench)
    worse = sum(a > b for a, b in zip(lhs.costs, ff.costs))
    verdict(3, 2000 <= lhs.y <= 2150 and worse == 0,
            f"lhs_obp {lhs.y:.2f} bins in [2000, 2150], first-fit {ff.y:.2f}, instances worse than first-fit {worse}")


def test_criterion_04_knapsack_ordinal():
    parts, ok = [], True
    for fam in ("UNCORRELATED", "WEAK", "STRONG"):
        bench = eval_benchmark(Task.KNAPSACK, family=fam)
        assert len(bench.instances) == 100 and len(bench.instances[0].weights) == 50
        lhs = evaluate(reference_heuristic("lhs_knapsack"), bench).y
        ratio = evaluate(reference_heuristic("ratio_greedy_knapsack"), bench).y
        ok &= lhs >= ratio
        parts.append(f"{fam} {lhs:.2f} vs {ratio:.2f}")
    verdict(4, ok, "lhs_knapsack >= ratio-greedy: " + ", ".join(parts))


def _dsl_policies(task: Task, rng: np.random.Generator, n: int) -> list[Policy]:
    return [Policy.from_program(sample_seed_program(task, rng, 3)) for _ in range(n)]


def test_criterion_05_oracle_bounds():
    rng = np.random.default_rng(2024)
    k_pols = [reference_heuristic(n) for n in ("lhs_knapsack", "eoh_knapsack_ratio", "ratio_greedy_knapsack")]
    k_pols += _dsl_policies(Task.KNAPSACK, rng, 5)
    t_pols = [reference_heuristic(n) for n in ("funsearch_tsp_nn", "lhs_tsp")] + _dsl_policies(Task.TSP, rng, 5)
    violations, k_tight, t_tight, checked = 0, 0, 0, 0
    families = ("UNCORRELATED", "WEAK", "STRONG")
    for i in range(50):
        inst = gen_knapsack(families[i % 3], int(rng.integers(5, 16)), 100, rng)
        opt = knapsack_optimum(inst.weights, inst.values, 100)
        for pol in k_pols:
            v = rollout(pol, inst)
            checked += 1
            violations += v > opt
            k_tight += v == opt
    for _ in range(20):
        inst = gen_tsp(int(rng.integers(4, 9)), rng)
        opt = tsp_optimum(inst.coords)
        for pol in t_pols:
            length = rollout(pol, inst)
            checked += 1
            violations += length < opt - 1e-9
            t_tight += abs(length - opt) <= 1e-9
    verdict(5, violations == 0 and k_tight > 0 and t_tight > 0,
            f"{checked} rollouts, {violations} bound violations, optimum reached: knapsack {k_tight}, tsp {t_tight}")


# -- criterion 6: gradients ---------------------------------------------------------------

def _latent_checks(seed: int) -> dict[str, float]:
    rng = np.random.default_rng(seed)
    enc, dec, neck, mapper = Encoder(rng), Decoder(rng), Bottleneck(rng), Mapper(rng)
    batch = [parse(t.split(), Task.TSP) for t in ("NEG F0", "ADD F0 MUL C0.5 F1", "MAX F1 SUB F0 F3")]
    inputs, targets, mask = teacher_batch(batch)
    ctx = context_batch([Task.TSP] * 3, [0, 1, 2])
    z = rng.normal(size=(3, 128))

    def ae_loss():
        return masked_token_nll(dec(ctx, neck(enc(batch)), inputs), targets, mask)

    def map_loss():
        return masked_token_nll(dec(ctx, mapper(Tensor(z)), inputs), targets, mask)

    return {
        "encoder": gradcheck(ae_loss, enc.parameters(), max_entries=3, rng=rng),
        "bottleneck": gradcheck(ae_loss, neck.parameters(), max_entries=3, rng=rng),
        "decoder": gradcheck(ae_loss, dec.parameters(), max_entries=3, rng=rng),
        "mapper": gradcheck(map_loss, mapper.parameters(), max_entries=3, rng=rng),
    }


def _flow_surrogate_checks(seed: int) -> dict[str, float]:
    rng = np.random.default_rng(seed)
    flow = Flow(8, rng=rng, hidden=12, zero_init=False)
    flow.initialize(rng.normal(0.2, 1.3, size=(64, 8)))
    z = rng.normal(size=(6, 8))
    sur = Surrogate(rng, dim=8, hidden=16)
    sur.freeze()
    a, b = rng.normal(size=(5, 8)), rng.normal(size=(5, 8))
    u = rng.normal(size=8)
    _, g = surrogate_grad(sur, u)
    h, worst = 1e-6, 0.0
    for i in range(8):
        e = np.zeros(8)
        e[i] = h
        num = (sur.value(u + e)[0] - sur.value(u - e)[0]) / (2 * h)
        worst = max(worst, abs(num - g[i]) / max(abs(num), abs(g[i]), 1e-6))
    sur_params = Surrogate(rng, dim=8, hidden=16, dropout=0.0)
    return {
        "flow": gradcheck(lambda: nll_tensor(flow, Tensor(z)), flow.parameters()),
        "surrogate": gradcheck(lambda: sum_(sur_params.pair_loss(sur_params(a), sur_params(b))),
                               sur_params.parameters(), max_entries=20, rng=rng),
        "surrogate_input": worst,
    }


def test_criterion_06_gradient_checks():
    worst: dict[str, float] = {}
    for seed in (0, 1, 2):
        for name, err in {**_latent_checks(seed), **_flow_surrogate_checks(seed)}.items():
            worst[name] = max(worst.get(name, 0.0), err)
    ok = all(v < 1e-4 for v in worst.values())
    verdict(6, ok, "max relative error over 3 seeds: " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


# -- criteria 7-12: learned pipeline --------------------------------------------------------

def test_criterion_07_flow_suite(pipeline):
    rep = pipeline.report("flow")
    ae = load_autoencoder(pipeline.layout.checkpoint("autoencoder"))
    flow = load_flow(pipeline.layout.checkpoint("flow"))
    z = ae.encoder.encode([e.program for e in read_corpus(pipeline.layout.corpus)])
    assert len(z) >= 1000
    trained_err = float(np.abs(flow_inverse(flow, flow_forward(flow, z)[0]) - z).max())
    fresh = Flow(128, rng=np.random.default_rng(0), zero_init=False)
    fresh.initialize(z[:128])
    fresh_err = float(np.abs(flow_inverse(fresh, flow_forward(fresh, z)[0]) - z).max())
    init, held = rep["heldout_nll_init"], rep["heldout_nll"]
    drop = (init - held) / abs(init)
    norm_u = rep["heldout_mean_norm_u"]
    ident = Flow(2, rng=np.random.default_rng(0))
    for n in ident.norms:
        n.initialized = True
    pts = np.random.default_rng(1).normal(size=(20000, 2))
    analytic = math.log(2 * math.pi) + 1.0
    ident_err = abs(flow_nll(ident, pts) - analytic) / analytic
    ok = (fresh_err < 1e-6 and trained_err < 1e-4 and drop >= 0.10 and abs(norm_u - SQRT_D) <= 0.2 * SQRT_D
          and ident_err < 0.05 and rep["wall_time"] < 600)
    verdict(7, ok, f"roundtrip untrained {fresh_err:.1e} / trained {trained_err:.1e} over {len(z)} latents, "
                   f"held-out NLL {init:.2f} -> {held:.2f} (drop {drop:.0%}), mean |u| {norm_u:.2f} "
                   f"vs {SQRT_D:.2f}+-20%, identity NLL err {ident_err:.1%}, train {rep['wall_time']:.0f}s")


def _planted(seed: int = 0):
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(200, 16))
    s = u @ rng.normal(size=16) + 0.01 * rng.normal(size=200)
    return u, s, [f"p{i}" for i in range(200)]


def test_criterion_08_surrogate_suite(pipeline):
    u, s, ids = _planted()
    train, val = build_pairs(u, s, ids, make_split(ids, 0.2, 0))
    cfg = SurrogateConfig(epochs=30, hidden=64)
    _, _, planted = train_surrogate(train, cfg, np.random.default_rng(0), val)
    flipped, _, _ = train_surrogate(train.flipped(), cfg, np.random.default_rng(0), val)
    flip_acc = pairwise_accuracy(flipped, val)
    real = pipeline.report("surrogate")
    assert real["task"] == "TSP" and real["space"] == "prior"
    ok = planted["heldout_pairwise_accuracy"] >= 0.9 and real["heldout_pairwise_accuracy"] >= 0.65 and flip_acc <= 0.5
    verdict(8, ok, f"planted {planted['heldout_pairwise_accuracy']:.3f} >= 0.9, real TSP (prior space) "
                   f"{real['heldout_pairwise_accuracy']:.3f} >= 0.65, label-flip {flip_acc:.3f} <= 0.5")


def test_criterion_09_mapper_suite(pipeline):
    rep = pipeline.report("mapper")
    ae = load_autoencoder(pipeline.layout.checkpoint("autoencoder"))
    programs = [e.program for e in read_corpus(pipeline.layout.corpus)]
    z = ae.encoder.encode(programs)
    pairs = [(rep["heldout_nll"], rep["heldout_nll_untrained"])]
    digest = ae.decoder.digest()
    for seed in (1, 2, 3, 4):
        rng = np.random.default_rng(seed)
        tr, ho = split_indices(len(programs), 0.1, rng)
        held = [programs[i] for i in ho]
        untrained = mapper_nll(Mapper(np.random.default_rng(seed + 1)), ae.decoder, z[ho], held)
        mapper, _ = train_mapper([programs[i] for i in tr], z[tr], ae.decoder, MapperConfig(epochs=2), rng,
                                 encoder=ae.encoder)
        pairs.append((mapper_nll(mapper, ae.decoder, z[ho], held), untrained))
    frozen = rep["decoder_digest_before"] == rep["decoder_digest_after"] and ae.decoder.digest() == digest
    recon = rep["train_greedy_reconstruction"]
    ok = recon >= 0.6 and all(a < b for a, b in pairs) and frozen
    verdict(9, ok, f"greedy reconstruction {recon:.3f} >= 0.6 on 200 training programs, held-out NLL trained < "
                   f"untrained on 5 seeds: " + ", ".join(f"{a:.3f}<{b:.3f}" for a, b in pairs)
                   + f", decoder unchanged {frozen}")


def test_mapper_prompt_family_robustness(pipeline):
    """Not a numbered criterion: greedy reconstruction varies by < 15 points across prompt families."""
    ae = load_autoencoder(pipeline.layout.checkpoint("autoencoder"))
    mapper = load_mapper(pipeline.layout.checkpoint("mapper"))
    programs = [e.program for e in read_corpus(pipeline.layout.corpus)][:200]
    z = ae.encoder.encode(programs)
    rates = [greedy_reconstruction(mapper, ae.decoder, z, programs, family=f) for f in range(3)]
    print("greedy reconstruction by prompt family:", [round(r, 3) for r in rates])
    assert max(rates) - min(rates) < 0.15


def _nn_search_mean() -> float:
    return evaluate(reference_heuristic("funsearch_tsp_nn"), search_benchmark(Task.TSP)).y


def test_criterion_10_end_to_end_tsp(pipeline):
    summary = pipeline.report(f"search_{Variant.LHS.value}")
    seeds = pipeline.seed_reports(Variant.LHS)
    assert len(seeds) == 5 and all(r["decodes"] == 100 for r in seeds)
    nn = _nn_search_mean()
    slowest = max(r["wall_time"] for r in seeds)
    ok = summary["improved_seeds"] >= 3 and summary["mean_best_objective"] <= nn and slowest < 900
    verdict(10, ok, f"improved over initial population in {summary['improved_seeds']}/5 seeds, mean best "
                    f"{summary['mean_best_objective']:.4f} <= nn {nn:.4f}, slowest seed {slowest:.0f}s < 900s")


def test_criterion_11_ablation_trend(pipeline):
    lhs = pipeline.report(f"search_{Variant.LHS.value}")
    no_grad = pipeline.report(f"search_{Variant.NO_GRAD.value}")
    no_flow = pipeline.report(f"search_{Variant.NO_FLOW.value}")
    ok = (lhs["mean_best_objective"] <= no_grad["mean_best_objective"]
          and no_flow["mean_success_rate"] <= lhs["mean_success_rate"])
    verdict(11, ok, f"mean best LHS {lhs['mean_best_objective']:.4f} <= NO_GRAD {no_grad['mean_best_objective']:.4f}, "
                    f"validity NO_FLOW {no_flow['mean_success_rate']:.2f} <= LHS {lhs['mean_success_rate']:.2f}")


def _repeat_stage(pipeline: Pipeline, tmp: Path, stage: str, inputs: tuple[str, ...], **over) -> bool:
    """Retrain one stage from copies of its inputs; compare checkpoints byte for byte."""
    layout = Layout(tmp)
    layout.corpus.parent.mkdir(parents=True)
    layout.ckpt.mkdir(parents=True)
    shutil.copyfile(pipeline.layout.corpus, layout.corpus)
    for name in inputs:
        shutil.copyfile(pipeline.layout.checkpoint(name), layout.checkpoint(name))
    cfg = load_config(None, [("out", str(tmp)), *((k, str(v)) for k, v in over.items())])
    a = cmd_train(cfg, layout, stage)
    shutil.rmtree(a)
    b = cmd_train(cfg, layout, stage)
    target = next(b.glob("*.ckpt"))
    reference = pipeline.dirs[stage] / target.name if not over else None
    same_twice = target.read_bytes() == (layout.ckpt / target.name).read_bytes()
    if reference is not None:
        same_twice &= target.read_bytes() == reference.read_bytes()
    return same_twice


def test_criterion_12_determinism(pipeline, tmp_path):
    checks = {}
    # full-configuration repeats, compared with the pipeline's own checkpoints
    checks["flow"] = _repeat_stage(pipeline, tmp_path / "flow", "flow", ("autoencoder",))
    checks["surrogate"] = _repeat_stage(pipeline, tmp_path / "sur", "surrogate", ("autoencoder", "flow"))
    # shortened repeats for the two slowest stages
    checks["autoencoder (2 epochs)"] = _repeat_stage(pipeline, tmp_path / "ae", "autoencoder", (), ae_epochs=2)
    checks["mapper (1 epoch)"] = _repeat_stage(pipeline, tmp_path / "map", "mapper", ("autoencoder",),
                                               mapper_epochs=1)
    # a full search seed, compared with the stored run
    cfg = pipeline.cfg()
    models = load_models(cfg, pipeline.layout, Variant.LHS)
    seed = cfg.seeds[0]
    rep = run_search(Task.TSP, search_config(cfg, seed), models, search_benchmark(Task.TSP))
    write_report(rep, tmp_path / "search")
    stored = pipeline.dirs[f"search_{Variant.LHS.value}"] / f"seed-{seed}"
    checks["search"] = all((tmp_path / "search" / f).read_bytes() == (stored / f).read_bytes()
                           for f in ("database.jsonl", "search_log.jsonl", "best_so_far.csv"))
    verdict(12, all(checks.values()), "bit-identical repeats: " + ", ".join(f"{k} {v}" for k, v in checks.items()))
