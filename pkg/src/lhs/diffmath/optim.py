from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import ContractError, Tensor


@dataclass
class ParamSet:
    """Named parameters plus AdamW moment buffers and a step counter."""

    params: dict[str, Tensor]
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: p.data for k, p in self.params.items()}


def adamw_step(
    params: ParamSet,
    grads: dict[str, np.ndarray],
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
    weight_decay: float = 0.0,
    clip_norm: float | None = None,
) -> ParamSet:
    """One AdamW update with decoupled weight decay, applied in place."""
    missing = set(params.params) - set(grads)
    if missing:
        raise ContractError(f"missing gradients for {sorted(missing)}")
    if clip_norm is not None:
        total = np.sqrt(sum(float(np.sum(grads[k] ** 2)) for k in params.params))
        scale = min(1.0, clip_norm / (total + 1e-12))
    else:
        scale = 1.0
    b1, b2 = betas
    params.step += 1
    t = params.step
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, p in params.params.items():
        g = grads[name] * scale
        if name not in params.m:
            params.m[name] = np.zeros_like(p.data)
            params.v[name] = np.zeros_like(p.data)
        m = params.m[name]
        v = params.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        if weight_decay:
            p.data = p.data - lr * weight_decay * p.data
        p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params
