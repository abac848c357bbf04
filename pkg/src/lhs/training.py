"""Shared mini-batch training loop with AdamW and a convergence check."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .diffmath import ParamSet, Tensor, adamw_step, value_and_grad


class TrainingError(RuntimeError):
    def __init__(self, message: str, diagnostics: dict[str, Any]):
        super().__init__(f"{message}: {diagnostics}")
        self.diagnostics = diagnostics


@dataclass
class FitConfig:
    epochs: int
    lr: float = 1e-3
    weight_decay: float = 0.0
    clip_norm: float | None = 1.0
    # training fails when final loss > ratio * initial loss
    convergence_ratio: float | None = 0.9


@dataclass
class History:
    epoch_loss: list[float] = field(default_factory=list)
    initial_loss: float | None = None
    steps: int = 0

    @property
    def final_loss(self) -> float:
        return self.epoch_loss[-1] if self.epoch_loss else math.nan


def fit(params: dict[str, Tensor], batches: Callable[[int], Sequence[Any]],
        loss: Callable[[Any, np.random.Generator], Tensor], cfg: FitConfig,
        rng: np.random.Generator, *, initial: Callable[[], float] | None = None,
        name: str = "model", on_epoch: Callable[[int, float], None] | None = None) -> History:
    """Run ``cfg.epochs`` passes; ``batches(epoch)`` yields the batch list of an epoch.

    ``initial`` (if given) measures the reference loss before training, otherwise
    the loss of the very first batch (before its update) is used.
    """
    hist = History()
    if initial is not None:
        hist.initial_loss = float(initial())
    state = ParamSet(params)
    for epoch in range(cfg.epochs):
        total, count = 0.0, 0
        for batch in batches(epoch):
            value, grads = value_and_grad(lambda: loss(batch, rng), params)
            if not math.isfinite(value):
                raise TrainingError(f"{name} loss became non-finite",
                                    {"epoch": epoch, "step": hist.steps, "loss": value})
            if hist.initial_loss is None:
                hist.initial_loss = value  # loss before the first update
            adamw_step(state, grads, cfg.lr, weight_decay=cfg.weight_decay, clip_norm=cfg.clip_norm)
            total += value
            count += 1
            hist.steps += 1
        mean_loss = total / max(count, 1)
        hist.epoch_loss.append(mean_loss)
        if on_epoch is not None:
            on_epoch(epoch, mean_loss)
    if cfg.convergence_ratio is not None and hist.epoch_loss and hist.initial_loss is not None:
        init, final = hist.initial_loss, hist.final_loss
        if init > 0 and final > cfg.convergence_ratio * init:
            raise TrainingError(f"{name} did not converge",
                                {"initial_loss": init, "final_loss": final,
                                 "epochs": cfg.epochs, "curve_tail": hist.epoch_loss[-5:]})
    return hist
