"""Pairwise-ranking performance surrogate over prior (or latent) space."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .diffmath import MLP, ContractError, Module, Tensor, exp, log, no_grad, relu, sum_
from .training import FitConfig, History, fit


class EmptyPairsError(ContractError):
    pass


@dataclass
class SplitPlan:
    train_ids: frozenset[str]
    val_ids: frozenset[str]
    fraction: float
    seed: int

    def side(self, pid: str) -> str | None:
        if pid in self.train_ids:
            return "train"
        if pid in self.val_ids:
            return "val"
        return None


def make_split(ids: Sequence[str], fraction: float, seed: int) -> SplitPlan:
    """Program-level split; ``fraction`` of the distinct ids go to validation."""
    uniq = sorted(set(ids))
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(uniq))
    k = int(round(len(uniq) * fraction))
    val = frozenset(uniq[i] for i in perm[:k])
    return SplitPlan(frozenset(uniq) - val, val, fraction, seed)


@dataclass
class PairSet:
    """Pairs as index arrays into ``points``: ``points[winners[k]]`` beat ``points[losers[k]]``."""

    points: np.ndarray
    winners: np.ndarray
    losers: np.ndarray
    ids: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.winners)

    def program_ids(self) -> set[str]:
        return {self.ids[i] for i in np.concatenate([self.winners, self.losers])}

    def flipped(self) -> PairSet:
        return PairSet(self.points, self.losers, self.winners, self.ids)


def ordered_pairs(scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All (i, j) with scores[i] > scores[j]; ties excluded."""
    s = np.asarray(scores, dtype=np.float64)
    wi, lo = np.nonzero(s[:, None] > s[None, :])
    return wi.astype(np.int64), lo.astype(np.int64)


def _side_pairs(points, scores, ids, cap, rng) -> PairSet:
    wi, lo = ordered_pairs(scores)
    if len(wi) > cap:
        keep = np.sort(rng.choice(len(wi), size=cap, replace=False))
        wi, lo = wi[keep], lo[keep]
    return PairSet(np.asarray(points, dtype=np.float64), wi, lo, list(ids))


def build_pairs(points: np.ndarray, scores: Sequence[float], ids: Sequence[str], split: SplitPlan,
                cap: int = 50_000, seed: int = 0) -> tuple[PairSet, PairSet]:
    """Strict preference pairs within each side of the split; crossing pairs never form."""
    scores = np.asarray(scores, dtype=np.float64)
    if not np.isfinite(scores).all():
        raise ContractError("pair construction needs finite scores")
    if len(np.unique(scores)) < 2:
        raise EmptyPairsError("all scores tied: no strict preference pairs")
    rng = np.random.default_rng(seed)
    out = []
    for side in ("train", "val"):
        idx = [i for i, pid in enumerate(ids) if split.side(pid) == side]
        out.append(_side_pairs(points[idx], scores[idx], [ids[i] for i in idx], cap, rng))
    if len(out[0]) == 0:
        raise EmptyPairsError("no strict preference pairs on the training side")
    return out[0], out[1]


def softplus(x: Tensor) -> Tensor:
    """log(1 + e^x), stable for large |x|."""
    absx = relu(x) + relu(-x)
    return relu(x) + log(exp(-absx) + 1.0)


class Surrogate(Module):
    def __init__(self, rng: np.random.Generator, dim: int = 128, hidden: int = 256,
                 dropout: float = 0.1, tau: float = 1.0):
        self.net = MLP([dim, hidden, hidden, 1], rng, activation="relu", dropout=dropout)
        self.tau = float(tau)
        self.arch = {"dim": dim, "hidden": hidden, "dropout": dropout, "tau": float(tau)}
        self.queries = 0

    def __call__(self, u, rng: np.random.Generator | None = None, training: bool = False) -> Tensor:
        x = u if isinstance(u, Tensor) else Tensor(np.atleast_2d(u))
        return self.net(x, rng, training).reshape(-1)

    def value(self, u: np.ndarray) -> np.ndarray:
        self.queries += 1
        with no_grad():
            return self(np.atleast_2d(u)).data.copy()

    def pair_loss(self, fw: Tensor, fl: Tensor) -> Tensor:
        return softplus((fw - fl) * -self.tau)


def ranknet_loss(model: Surrogate, winner: np.ndarray, loser: np.ndarray) -> float:
    """-log sigma(tau * (f(winner) - f(loser))) for one pair."""
    with no_grad():
        f = model(np.stack([winner, loser]))
        return model.pair_loss(f[0:1], f[1:2]).item()


def surrogate_grad(model: Surrogate, u: np.ndarray) -> tuple[float, np.ndarray]:
    """Value and exact gradient of the (eval-mode) surrogate at a single point."""
    model.queries += 1
    x = Tensor(np.asarray(u, dtype=np.float64).reshape(1, -1), requires_grad=True)
    out = sum_(model(x))
    out.backward()
    return out.item(), x.grad.reshape(-1).copy()


def pairwise_accuracy(model: Surrogate, pairs: PairSet) -> float:
    if len(pairs) == 0:
        return float("nan")
    with no_grad():
        f = model(pairs.points).data
    return float(np.mean(f[pairs.winners] > f[pairs.losers]))


@dataclass
class SurrogateConfig:
    epochs: int = 20
    batch_size: int = 256
    lr: float = 1e-3
    weight_decay: float = 1e-4
    tau: float = 1.0
    dropout: float = 0.1
    hidden: int = 256
    cap: int = 50_000
    val_fraction: float = 0.2


def train_surrogate(train: PairSet, cfg: SurrogateConfig, rng: np.random.Generator,
                    val: PairSet | None = None) -> tuple[Surrogate, History, dict]:
    if len(train) == 0:
        raise EmptyPairsError("surrogate training needs at least one pair")
    points = train.points
    model = Surrogate(rng, points.shape[1], cfg.hidden, cfg.dropout, cfg.tau)
    curve: list[dict] = []

    def batches(epoch):
        perm = rng.permutation(len(train))
        return [perm[i:i + cfg.batch_size] for i in range(0, len(perm), cfg.batch_size)]

    def loss(idx, r):
        w, lo = train.winners[idx], train.losers[idx]
        f = model(Tensor(np.concatenate([points[w], points[lo]])), r, training=True)
        n = len(idx)
        return sum_(model.pair_loss(f[:n], f[n:])) * (1.0 / n)

    def on_epoch(epoch, value):
        row = {"epoch": epoch, "loss": value, "train_acc": pairwise_accuracy(model, train)}
        if val is not None:
            row["val_acc"] = pairwise_accuracy(model, val)
        curve.append(row)

    hist = fit(model.parameters(), batches, loss,
               FitConfig(cfg.epochs, cfg.lr, cfg.weight_decay, clip_norm=10.0, convergence_ratio=1.0),
               rng, name="surrogate", on_epoch=on_epoch)
    model.freeze()
    report = {
        "config": asdict(cfg),
        "train_pairs": len(train),
        "val_pairs": len(val) if val is not None else 0,
        "curve": curve,
        "train_accuracy": pairwise_accuracy(model, train),
        "heldout_pairwise_accuracy": pairwise_accuracy(model, val) if val is not None else None,
    }
    return model, hist, report


def fit_task_surrogate(points: np.ndarray, scores: Sequence[float], ids: Sequence[str],
                       cfg: SurrogateConfig, seed: int) -> tuple[Surrogate, dict]:
    """Split by program id, build pairs, and train; the report carries held-out accuracy."""
    split = make_split(ids, cfg.val_fraction, seed)
    train, val = build_pairs(points, scores, ids, split, cfg.cap, seed)
    model, _, report = train_surrogate(train, cfg, np.random.default_rng(seed), val)
    report["split_seed"] = seed
    return model, report
