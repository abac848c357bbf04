"""Reverse-mode differentiable computation core (float64, numpy-backed)."""

from . import checkpoint
from .gradcheck import gradcheck, relative_error
from .nn import MLP, LayerNorm, Linear, Module, SelfAttention, TransformerBlock, causal_bias, param
from .optim import ParamSet, adamw_step
from .rng import child_seed, seeded_rng
from .tensor import (
    ContractError,
    NumericsError,
    Tensor,
    add,
    as_tensor,
    concat,
    div,
    dropout,
    embedding,
    exp,
    leaky_relu,
    log,
    log_softmax,
    matmul,
    mean,
    mul,
    neg,
    no_grad,
    relu,
    reshape,
    sigmoid,
    slice_,
    softmax,
    sub,
    sum_,
    tanh,
    transpose,
    value_and_grad,
)


def forward_backward(fn, params):
    """Run ``fn`` (a closure building a scalar graph) and return (value, grads)."""
    return value_and_grad(fn, params)


__all__ = [
    "checkpoint", "gradcheck", "relative_error", "MLP", "LayerNorm", "Linear", "Module",
    "SelfAttention", "TransformerBlock", "causal_bias", "param", "ParamSet", "adamw_step",
    "child_seed", "seeded_rng", "ContractError", "NumericsError", "Tensor", "add", "as_tensor",
    "concat", "div", "dropout", "embedding", "exp", "leaky_relu", "log", "log_softmax", "matmul",
    "mean", "mul", "neg", "no_grad", "relu", "reshape", "sigmoid", "slice_", "softmax", "sub",
    "sum_", "tanh", "transpose", "value_and_grad", "forward_backward",
]
