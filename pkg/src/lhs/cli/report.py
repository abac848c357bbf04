"""Figures and CSV tables from finished run directories."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _finished(runs: Path, prefix: str) -> list[Path]:
    return sorted(d for d in runs.glob(f"{prefix}-*") if (d / "DONE").exists())


def _training_kind(report: dict) -> str | None:
    if "decoder_digest" in report:
        return "autoencoder"
    if "epoch_nll" in report:
        return "flow"
    if "heldout_pairwise_accuracy" in report:
        return "surrogate"
    if "decoder_digest_before" in report:
        return "mapper"
    return None


def _read_curve(path: Path) -> list[float]:
    with open(path) as fh:
        return [float(row["best_s"]) for row in csv.DictReader(fh)]


def render_report(runs: Path, out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    train = []
    for d in _finished(runs, "train"):
        rep = json.loads((d / "report.json").read_text())
        kind = _training_kind(rep)
        if kind is not None:
            train.append((d.name, kind, rep))

    fig, axes = plt.subplots(2, 2, figsize=(10, 7))
    panels = {"autoencoder": axes[0, 0], "flow": axes[0, 1], "surrogate": axes[1, 0], "mapper": axes[1, 1]}
    for name, kind, rep in train:
        ax = panels[kind]
        if kind == "flow":
            ax.plot(rep["epoch_nll"], label=name)
        elif kind == "surrogate":
            ax.plot([row.get("val_acc", float("nan")) for row in rep["curve"]],
                    label=f"{rep.get('task', '')} {rep.get('space', '')}")
        else:
            ax.plot(rep["epoch_loss"], label=name)
    for kind, ax in panels.items():
        ax.set_title(kind)
        ax.set_xlabel("epoch")
        ax.set_ylabel("held-out pair accuracy" if kind == "surrogate" else "loss")
        if ax.lines:
            ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out / "training_curves.png", dpi=120)
    plt.close(fig)

    with open(out / "training_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run", "stage", "metric", "value"])
        keys = {"autoencoder": ("heldout_token_accuracy", "train_token_accuracy"),
                "flow": ("heldout_nll_init", "heldout_nll", "heldout_mean_norm_u", "roundtrip_max_err"),
                "surrogate": ("heldout_pairwise_accuracy", "train_accuracy", "train_pairs", "val_pairs"),
                "mapper": ("heldout_nll_untrained", "heldout_nll", "train_greedy_reconstruction",
                           "heldout_greedy_reconstruction")}
        for name, kind, rep in train:
            for k in keys[kind]:
                w.writerow([name, kind, k, rep.get(k)])

    searches = []
    for d in _finished(runs, "search"):
        summary = json.loads((d / "summary.json").read_text())
        curves = [_read_curve(p) for p in sorted(d.glob("seed-*/best_so_far.csv"))]
        searches.append((d.name, summary, curves))

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, summary, curves in searches:
        if not curves:
            continue
        n = max(len(c) for c in curves)
        padded = [c + [c[-1]] * (n - len(c)) for c in curves]
        mean = [sum(col) / len(col) for col in zip(*padded)]
        ax.plot(range(n), mean, label=f"{summary['task']} {summary['variant']}")
    ax.set_xlabel("round")
    ax.set_ylabel("best signed score (mean over seeds)")
    if ax.lines:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out / "search_curves.png", dpi=120)
    plt.close(fig)

    with open(out / "search_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run", "task", "variant", "n_seeds", "mean_best_objective", "std_best_objective",
                    "mean_success_rate", "improved_seeds"])
        for name, s, _ in searches:
            w.writerow([name, s["task"], s["variant"], len(s["seeds"]), s["mean_best_objective"],
                        s["std_best_objective"], s["mean_success_rate"], s["improved_seeds"]])
    return out
