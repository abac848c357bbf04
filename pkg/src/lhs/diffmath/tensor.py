"""Array-valued reverse-mode automatic differentiation.

A :class:`Tensor` wraps a float64 numpy array. Every primitive records its
parents and a closure mapping the output adjoint to parent adjoints; calling
:meth:`Tensor.backward` on a scalar walks the graph in reverse topological
order and then frees it.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

PROTECT_EPS = 1e-6

_grad_enabled = True


class NumericsError(FloatingPointError):
    """A primitive produced NaN or Inf."""


class ContractError(ValueError):
    """A caller violated a documented precondition."""


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference paths)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled() -> bool:
    return _grad_enabled


def _check(values: np.ndarray, op: str, stage: str = "forward") -> None:
    # A finite sum implies every entry is finite; only fall back to the
    # elementwise test when the sum is inf/nan (which may be plain overflow).
    with np.errstate(over="ignore", invalid="ignore"):
        total = values.sum()
    if np.isfinite(total):
        return
    if not np.isfinite(values).all():
        raise NumericsError(f"non-finite value produced by {op} ({stage})")


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None
        self.op = "leaf"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ContractError("backward() without a seed gradient requires a scalar output")
            grad = np.ones_like(self.data)
        order = _topo_order(self)
        self.grad = np.asarray(grad, dtype=np.float64).reshape(self.shape)
        for node in reversed(order):
            if node._backward is None or node.grad is None:
                continue
            parent_grads = node._backward(node.grad)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                pg = _unbroadcast(np.asarray(pg, dtype=np.float64), parent.shape)
                _check(pg, node.op, "backward")
                # never mutated in place, so sharing the array is safe
                parent.grad = pg if parent.grad is None else parent.grad + pg
        # free the graph; leaves keep their accumulated grad
        for node in order:
            if node._parents:
                node._parents = ()
                node._backward = None
                node.grad = None if node is not self else node.grad

    # operator sugar -------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return slice_(self, idx)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes)


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    return order


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, parents: Sequence[Tensor], backward: Callable, op: str) -> Tensor:
    _check(data, op)
    out = Tensor(data)
    out.op = op
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


# elementwise ---------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data), "mul")


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _result(-a.data, (a,), lambda g: (-g,), "neg")


def protected_denominator(b: np.ndarray) -> np.ndarray:
    """sign(b) * max(|b|, 1e-6) with sign(0) taken as +1."""
    sign = np.where(b < 0, -1.0, 1.0)
    return sign * np.maximum(np.abs(b), PROTECT_EPS)


def div(a, b) -> Tensor:
    """Protected division a / (sign(b) * max(|b|, 1e-6))."""
    a, b = as_tensor(a), as_tensor(b)
    den = protected_denominator(b.data)
    out = a.data / den
    live = np.abs(b.data) > PROTECT_EPS

    def bw(g):
        return g / den, np.where(live, -g * a.data / (den * den), 0.0)

    return _result(out, (a, b), bw, "div")


def relu(a) -> Tensor:
    a = as_tensor(a)
    pos = a.data > 0
    return _result(np.maximum(a.data, 0.0), (a,), lambda g: (g * pos,), "relu")


def leaky_relu(a, slope: float = 0.01) -> Tensor:
    a = as_tensor(a)
    factor = np.where(a.data > 0, 1.0, slope)
    return _result(a.data * factor, (a,), lambda g: (g * factor,), "leaky_relu")


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _result(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _result(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def exp(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(over="ignore"):
        out = np.exp(a.data)
    return _result(out, (a,), lambda g: (g * out,), "exp")


def log(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)
    return _result(out, (a,), lambda g: (g / a.data,), "log")


# reductions ----------------------------------------------------------------

def _expand(g: np.ndarray, shape, axis, keepdims) -> np.ndarray:
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def sum_(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)
    return _result(out, (a,), lambda g: (_expand(g, a.shape, axis, keepdims),), "sum")


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    out = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size // max(out.size, 1)
    return _result(out, (a,), lambda g: (_expand(g, a.shape, axis, keepdims) / count,), "mean")


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _result(out, (a,), bw, "softmax")


def log_softmax(a, axis: int = -1) -> Tensor:
    """Fused log(softmax(a)); avoids log(0) on saturated rows."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    probs = np.exp(out)

    def bw(g):
        return (g - probs * g.sum(axis=axis, keepdims=True),)

    return _result(out, (a,), bw, "log_softmax")


# linear algebra and layout -------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data @ b.data

    def bw(g):
        ga = gb = None
        if a.requires_grad:
            ga = g @ np.swapaxes(b.data, -1, -2) if b.ndim > 1 else np.multiply.outer(g, b.data)
        if b.requires_grad:
            if b.ndim == 2 and a.ndim > 2:
                # fold batch dims into one GEMM instead of summing a batched product
                gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = np.swapaxes(a.data, -1, -2) @ g if a.ndim > 1 else np.multiply.outer(a.data, g)
        return ga, gb

    return _result(out, (a, b), bw, "matmul")


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return _result(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    axes = tuple(axes) if axes else tuple(reversed(range(a.ndim)))
    inverse = tuple(np.argsort(axes))
    return _result(a.data.transpose(axes), (a,), lambda g: (g.transpose(inverse),), "transpose")


def slice_(a, idx) -> Tensor:
    a = as_tensor(a)

    parts = idx if isinstance(idx, tuple) else (idx,)
    basic = all(isinstance(p, (int, slice, type(None), type(Ellipsis))) for p in parts)

    def bw(g):
        full = np.zeros_like(a.data)
        if basic:
            full[idx] += g
        else:
            np.add.at(full, idx, g)
        return (full,)

    return _result(a.data[idx], (a,), bw, "slice")


def concat(tensors: Iterable, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in ts]
    bounds = np.cumsum([0] + sizes)

    def bw(g):
        return tuple(
            np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis) for i in range(len(ts))
        )

    return _result(np.concatenate([t.data for t in ts], axis=axis), ts, bw, "concat")


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup ``table[ids]`` with scatter-add backward."""
    ids = np.asarray(ids, dtype=np.int64)

    def bw(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, table.shape[-1]))
        return (full,)

    return _result(table.data[ids], (table,), bw, "embedding")


def dropout(a, rate: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    """Inverted dropout; identity when not training or rate is 0."""
    a = as_tensor(a)
    if not training or rate <= 0.0:
        return a
    if rng is None:
        raise ContractError("dropout in training mode needs a generator")
    mask = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return _result(a.data * mask, (a,), lambda g: (g * mask,), "dropout")


def value_and_grad(fn: Callable[[], Tensor], params: dict[str, Tensor]) -> tuple[float, dict[str, np.ndarray]]:
    """Evaluate a scalar-valued closure and return gradients for ``params``."""
    for p in params.values():
        p.grad = None
    out = fn()
    if out.data.size != 1:
        raise ContractError("value_and_grad expects a scalar output")
    out.backward()
    grads = {
        name: (np.array(p.grad) if p.grad is not None else np.zeros_like(p.data))
        for name, p in params.items()
    }
    for p in params.values():
        p.grad = None
    return float(out.data), grads
