"""RealNVP-style normalizing flow between encoder space Z and a Gaussian prior space U."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .diffmath import (
    MLP,
    ContractError,
    Module,
    NumericsError,
    Tensor,
    exp,
    no_grad,
    param,
    sum_,
    tanh,
)
from .training import FitConfig, History, fit

LOG_2PI = math.log(2.0 * math.pi)


class ActNorm(Module):
    """y = (x + bias) * exp(log_scale); data-dependent init on the first batch."""

    def __init__(self, dim: int):
        self.bias = param(np.zeros(dim))
        self.log_scale = param(np.zeros(dim))
        self.initialized = False

    def initialize(self, x: np.ndarray) -> None:
        if self.initialized:
            raise ContractError("ActNorm already initialized")
        mu = x.mean(axis=0)
        var = x.var(axis=0)
        var = np.where(var > 1e-12, var, 1.0)
        self.bias.data = -mu
        self.log_scale.data = -0.5 * np.log(var)
        self.initialized = True

    def __call__(self, x: Tensor) -> tuple[Tensor, Tensor]:
        y = (x + self.bias) * exp(self.log_scale)
        return y, sum_(self.log_scale)

    def inverse(self, y: np.ndarray) -> np.ndarray:
        return y * np.exp(-self.log_scale.data) - self.bias.data


class Coupling(Module):
    """Affine coupling; dimensions with mask 1 pass through unchanged."""

    def __init__(self, dim: int, parity: int, rng: np.random.Generator, hidden: int = 128,
                 slope: float = 0.2, factor: float = 0.8, zero_init: bool = True):
        self.s_net = MLP([dim, hidden, dim], rng, activation="leaky", slope=slope, zero_last=zero_init)
        self.t_net = MLP([dim, hidden, dim], rng, activation="leaky", slope=slope, zero_last=zero_init)
        self.factor = param(np.array(factor))
        self.parity = parity
        self.mask = (np.arange(dim) % 2 == parity).astype(np.float64)

    def _st(self, kept: Tensor) -> tuple[Tensor, Tensor]:
        free = 1.0 - self.mask
        s = self.factor * tanh(self.s_net(kept)) * free
        t = self.t_net(kept) * free
        return s, t

    def __call__(self, x: Tensor) -> tuple[Tensor, Tensor]:
        kept = x * self.mask
        s, t = self._st(kept)
        y = kept + (x * exp(s) + t) * (1.0 - self.mask)
        return y, sum_(s, axis=-1)

    def inverse(self, y: np.ndarray) -> np.ndarray:
        kept = y * self.mask
        with no_grad():
            s, t = self._st(Tensor(kept))
        return kept + (y - t.data) * np.exp(-s.data) * (1.0 - self.mask)


class Flow(Module):
    """[ActNorm, Coupling] x n_layers with alternating even/odd masks."""

    def __init__(self, dim: int = 128, n_layers: int = 4, rng: np.random.Generator | None = None,
                 hidden: int = 128, zero_init: bool = True):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.dim = dim
        self.hidden = hidden
        self.norms = [ActNorm(dim) for _ in range(n_layers)]
        self.couplings = [Coupling(dim, i % 2, rng, hidden, zero_init=zero_init) for i in range(n_layers)]

    @property
    def initialized(self) -> bool:
        return all(n.initialized for n in self.norms)

    def initialize(self, z: np.ndarray) -> None:
        """Data-dependent ActNorm init, layer by layer, on one batch."""
        x = Tensor(z)
        with no_grad():
            for norm, coup in zip(self.norms, self.couplings):
                norm.initialize(x.data)
                x, _ = norm(x)
                x, _ = coup(x)

    def forward(self, z) -> tuple[Tensor, Tensor]:
        x = z if isinstance(z, Tensor) else Tensor(np.atleast_2d(z))
        logdet = Tensor(np.zeros(x.shape[0]))
        for norm, coup in zip(self.norms, self.couplings):
            x, ld = norm(x)
            logdet = logdet + ld
            x, ld = coup(x)
            logdet = logdet + ld
        return x, logdet

    def inverse(self, u: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(u, dtype=np.float64))
        for norm, coup in zip(reversed(self.norms), reversed(self.couplings)):
            x = coup.inverse(x)
            x = norm.inverse(x)
        if not np.isfinite(x).all():
            raise NumericsError("non-finite value produced by flow inverse")
        return x

    def meta(self) -> dict:
        return {"dim": self.dim, "n_layers": len(self.norms), "hidden": self.hidden,
                "parities": [c.parity for c in self.couplings], "initialized": self.initialized}


def flow_forward(model: Flow, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    with no_grad():
        u, logdet = model.forward(z)
    return u.data, logdet.data


def flow_inverse(model: Flow, u: np.ndarray) -> np.ndarray:
    return model.inverse(u)


def inverse_logdet(model: Flow, u: np.ndarray) -> np.ndarray:
    """log|det dF^-1/du| evaluated at u, computed from the inverse pass itself."""
    x = np.atleast_2d(np.asarray(u, dtype=np.float64))
    total = np.zeros(len(x))
    for norm, coup in zip(reversed(model.norms), reversed(model.couplings)):
        kept = x * coup.mask
        with no_grad():
            s, _ = coup._st(Tensor(kept))
        total -= s.data.sum(axis=-1)
        x = coup.inverse(x)
        total -= norm.log_scale.data.sum()
        x = norm.inverse(x)
    return total


def nll_tensor(model: Flow, z) -> Tensor:
    u, logdet = model.forward(z)
    d = u.shape[-1]
    log_pz = -0.5 * sum_(u * u, axis=-1) - 0.5 * d * LOG_2PI + logdet
    return -(sum_(log_pz) * (1.0 / u.shape[0]))


def flow_nll(model: Flow, z: np.ndarray) -> float:
    with no_grad():
        return nll_tensor(model, Tensor(np.atleast_2d(z))).item()


@dataclass
class FlowConfig:
    epochs: int = 300
    batch_size: int = 128
    lr: float = 1e-3
    weight_decay: float = 1e-5
    noise: float = 0.01
    n_layers: int = 4
    hidden: int = 128


def train_flow(z: np.ndarray, cfg: FlowConfig, rng: np.random.Generator,
               min_points: int = 500) -> tuple[Flow, History]:
    """Maximum-likelihood fit; ActNorm initialized on the first shuffled batch.

    The reference loss for divergence detection is the full-set NLL right after
    initialization (the init batch itself is standardized exactly and would be
    an optimistic reference).
    """
    z = np.asarray(z, dtype=np.float64)
    if len(z) < min_points:
        raise ContractError(f"flow training needs >= {min_points} latents, got {len(z)}")
    model = Flow(z.shape[1], cfg.n_layers, rng, cfg.hidden)
    order = rng.permutation(len(z))

    def batches(epoch):
        perm = order if epoch == 0 else rng.permutation(len(z))
        return [perm[i:i + cfg.batch_size] for i in range(0, len(perm), cfg.batch_size)]

    model.initialize(z[order[: cfg.batch_size]])

    def loss(idx, r):
        x = z[idx]
        if cfg.noise > 0:
            x = x + r.normal(0.0, cfg.noise, size=x.shape)
        return nll_tensor(model, Tensor(x))

    hist = fit(model.parameters(), batches, loss,
               FitConfig(cfg.epochs, cfg.lr, cfg.weight_decay, clip_norm=10.0, convergence_ratio=1.0),
               rng, initial=lambda: flow_nll(model, z), name="flow")
    model.freeze()
    return model, hist


def flow_report(model: Flow, hist: History, z_train: np.ndarray, z_held: np.ndarray,
                nll_init: float | None = None, cfg: FlowConfig | None = None) -> dict:
    u, _ = flow_forward(model, z_held)
    back = flow_inverse(model, u)
    return {
        "config": asdict(cfg) if cfg else None,
        "epoch_nll": hist.epoch_loss,
        "train_nll": flow_nll(model, z_train),
        "heldout_nll": flow_nll(model, z_held),
        "heldout_nll_init": nll_init,
        "heldout_mean_norm_u": float(np.linalg.norm(u, axis=1).mean()),
        "roundtrip_max_err": float(np.abs(back - z_held).max()),
        "meta": model.meta(),
    }
