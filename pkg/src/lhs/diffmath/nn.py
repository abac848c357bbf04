"""Small neural building blocks on top of :mod:`lhs.diffmath.tensor`."""

from __future__ import annotations

import math

import numpy as np

from .tensor import (
    Tensor,
    dropout,
    exp,
    leaky_relu,
    log,
    mean,
    relu,
    reshape,
    softmax,
    transpose,
)

LN_EPS = 1e-5


class Module:
    """Parameter container. Attributes holding Tensors, Modules or lists of
    Modules are discovered in insertion order; every Tensor attribute is a
    parameter, frozen or not."""

    def parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for name, value in vars(self).items():
            key = f"{prefix}{name}"
            if isinstance(value, Tensor):
                out[key] = value
            elif isinstance(value, Module):
                out.update(value.parameters(key + "."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.update(item.parameters(f"{key}.{i}."))
        return out

    def trainable(self) -> dict[str, Tensor]:
        return {k: p for k, p in self.parameters().items() if p.requires_grad}

    def freeze(self) -> None:
        for p in self.parameters().values():
            p.requires_grad = False

    @property
    def frozen(self) -> bool:
        return not any(p.requires_grad for p in self.parameters().values())

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters().values())

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.parameters().items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        missing = set(params) - set(arrays)
        if missing:
            raise KeyError(f"checkpoint lacks parameters: {sorted(missing)[:5]}")
        for k, p in params.items():
            if arrays[k].shape != p.data.shape:
                raise ValueError(f"shape mismatch for {k}: {arrays[k].shape} vs {p.data.shape}")
            p.data = np.array(arrays[k], dtype=np.float64)

    def digest(self) -> str:
        from .checkpoint import digest

        return digest(self.state_arrays())


def param(values: np.ndarray) -> Tensor:
    return Tensor(np.array(values, dtype=np.float64), requires_grad=True)


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, *, zero: bool = False):
        if zero:
            w = np.zeros((n_in, n_out))
        else:
            bound = math.sqrt(6.0 / (n_in + n_out))
            w = rng.uniform(-bound, bound, size=(n_in, n_out))
        self.weight = param(w)
        self.bias = param(np.zeros(n_out))

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.weight + self.bias


class LayerNorm(Module):
    def __init__(self, dim: int):
        self.gain = param(np.ones(dim))
        self.shift = param(np.zeros(dim))

    def __call__(self, x: Tensor) -> Tensor:
        centered = x - mean(x, axis=-1, keepdims=True)
        var = mean(centered * centered, axis=-1, keepdims=True)
        # 1/sqrt via exp/log keeps the graph within the elementwise primitives
        inv_std = exp(log(var + LN_EPS) * -0.5)
        return centered * inv_std * self.gain + self.shift


class MLP(Module):
    """Linear layers with a shared activation between them."""

    def __init__(self, sizes: list[int], rng: np.random.Generator, *, activation: str = "relu",
                 slope: float = 0.01, dropout: float = 0.0, zero_last: bool = False):
        self.layers = [
            Linear(a, b, rng, zero=zero_last and i == len(sizes) - 2)
            for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:]))
        ]
        self.activation = activation
        self.slope = slope
        self.rate = dropout

    def __call__(self, x: Tensor, rng: np.random.Generator | None = None, training: bool = False) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = relu(x) if self.activation == "relu" else leaky_relu(x, self.slope)
                x = dropout(x, self.rate, rng, training)
        return x


def causal_bias(length: int) -> np.ndarray:
    """Additive attention bias forbidding attention to later positions."""
    upper = np.triu(np.ones((length, length), dtype=bool), k=1)
    return np.where(upper, -1e9, 0.0)


class SelfAttention(Module):
    def __init__(self, dim: int, heads: int, rng: np.random.Generator, dropout: float = 0.0):
        if dim % heads:
            raise ValueError("dim must be divisible by heads")
        self.heads = heads
        self.head_dim = dim // heads
        self.q = Linear(dim, dim, rng)
        self.k = Linear(dim, dim, rng)
        self.v = Linear(dim, dim, rng)
        self.out = Linear(dim, dim, rng)
        self.rate = dropout

    def _split(self, x: Tensor, b: int, n: int) -> Tensor:
        return transpose(reshape(x, (b, n, self.heads, self.head_dim)), (0, 2, 1, 3))

    def __call__(self, x: Tensor, bias: np.ndarray | None = None,
                 rng: np.random.Generator | None = None, training: bool = False) -> Tensor:
        b, n, d = x.shape
        q = self._split(self.q(x), b, n)
        k = self._split(self.k(x), b, n)
        v = self._split(self.v(x), b, n)
        scores = (q @ transpose(k, (0, 1, 3, 2))) * (1.0 / math.sqrt(self.head_dim))
        if bias is not None:
            scores = scores + bias
        weights = dropout(softmax(scores, axis=-1), self.rate, rng, training)
        ctx = reshape(transpose(weights @ v, (0, 2, 1, 3)), (b, n, d))
        return self.out(ctx)


class TransformerBlock(Module):
    """Pre-norm block: x + attn(ln(x)); x + ffn(ln(x))."""

    def __init__(self, dim: int, heads: int, ff: int, rng: np.random.Generator, dropout: float = 0.0):
        self.ln1 = LayerNorm(dim)
        self.attn = SelfAttention(dim, heads, rng, dropout)
        self.ln2 = LayerNorm(dim)
        self.ff = MLP([dim, ff, dim], rng)
        self.rate = dropout

    def __call__(self, x: Tensor, bias: np.ndarray | None = None,
                 rng: np.random.Generator | None = None, training: bool = False) -> Tensor:
        x = x + dropout(self.attn(self.ln1(x), bias, rng, training), self.rate, rng, training)
        x = x + dropout(self.ff(self.ln2(x)), self.rate, rng, training)
        return x
