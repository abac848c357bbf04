"""Program encoder, autoregressive DSL decoder and the latent-to-prompt mapper."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..diffmath import (
    MLP,
    LayerNorm,
    Linear,
    Module,
    SelfAttention,
    Tensor,
    TransformerBlock,
    causal_bias,
    concat,
    dropout,
    embedding,
    log_softmax,
    no_grad,
    param,
    reshape,
    sum_,
    tanh,
)
from ..dsl.program import Program
from ..dsl.vocab import VOCAB_SIZE, Task
from .tokens import CONTEXT_TOKENS, MAX_POS, TASK_ORDER, program_ids

LATENT_DIM = 128
EMBED_DIM = 128  # decoder width e
PROMPT_LEN = 16  # K soft tokens
ENCODER_WIDTH = 64


def _normal(rng: np.random.Generator, shape, std: float) -> Tensor:
    return param(rng.normal(0.0, std, size=shape))


class Encoder(Module):
    """Mean-pooled token encoder with a task token in front.

    Each position is squashed as tanh(token + position) before pooling, so the
    pooled vector is sensitive to token order and not just the token multiset.
    """

    def __init__(self, rng: np.random.Generator, width: int = ENCODER_WIDTH, dim: int = LATENT_DIM):
        self.tok = _normal(rng, (VOCAB_SIZE + len(TASK_ORDER), width), 0.5)
        self.pos = _normal(rng, (MAX_POS, width), 0.5)
        self.proj = MLP([width, dim, dim], rng, activation="leaky", slope=0.2)
        self.dim = dim

    @staticmethod
    def batch_ids(programs: Sequence[Program]) -> tuple[np.ndarray, np.ndarray]:
        width = 1 + max(len(p) for p in programs)
        ids = np.zeros((len(programs), width), dtype=np.int64)
        mask = np.zeros((len(programs), width))
        for i, p in enumerate(programs):
            row = [VOCAB_SIZE + TASK_ORDER.index(p.task), *program_ids(p)]
            ids[i, : len(row)] = row
            mask[i, : len(row)] = 1.0
        return ids, mask

    def __call__(self, programs: Sequence[Program]) -> Tensor:
        ids, mask = self.batch_ids(programs)
        h = tanh(embedding(self.tok, ids) + embedding(self.pos, np.arange(ids.shape[1])))
        m = mask[:, :, None]
        pooled = sum_(h * m, axis=1) * (1.0 / mask.sum(axis=1, keepdims=True))
        return self.proj(pooled)

    def encode(self, programs: Sequence[Program]) -> np.ndarray:
        with no_grad():
            out = []
            for i in range(0, len(programs), 256):
                out.append(self(programs[i:i + 256]).data)
        return np.concatenate(out, axis=0)


class Decoder(Module):
    """Causal transformer over DSL tokens conditioned on context and prefix slots.

    Sequence layout: [context tokens][prefix vectors][BOS t1 ... tn]. Only the
    BOS-onward part carries position embeddings.
    """

    def __init__(self, rng: np.random.Generator, dim: int = EMBED_DIM, blocks: int = 2,
                 heads: int = 2, ff: int = 256, rate: float = 0.1):
        self.tok = _normal(rng, (VOCAB_SIZE, dim), 0.1)
        self.pos = _normal(rng, (MAX_POS, dim), 0.1)
        self.ctx = _normal(rng, (len(CONTEXT_TOKENS), dim), 0.1)
        self.blocks = [TransformerBlock(dim, heads, ff, rng, rate) for _ in range(blocks)]
        self.ln = LayerNorm(dim)
        self.out = Linear(dim, VOCAB_SIZE, rng)
        self.rate = rate
        self.dim = dim

    def __call__(self, context: np.ndarray, prefix: Tensor | None, inputs: np.ndarray,
                 rng: np.random.Generator | None = None, training: bool = False) -> Tensor:
        """Logits (B, L, vocab) for every BOS-onward input position."""
        b, length = inputs.shape
        parts = [embedding(self.ctx, context)]
        if prefix is not None:
            parts.append(prefix)
        head = sum(p.shape[1] for p in parts)
        parts.append(embedding(self.tok, inputs) + embedding(self.pos, np.arange(length)))
        x = dropout(concat(parts, axis=1), self.rate, rng, training)
        bias = causal_bias(head + length)
        for block in self.blocks:
            x = block(x, bias, rng, training)
        x = self.ln(x[:, head:, :])
        return self.out(x)


class Bottleneck(Module):
    """Single conditioning token used while pretraining the autoencoder."""

    def __init__(self, rng: np.random.Generator, dim: int = LATENT_DIM, width: int = EMBED_DIM):
        self.lin = Linear(dim, width, rng)

    def __call__(self, z: Tensor) -> Tensor:
        b = z.shape[0]
        return reshape(self.lin(z), (b, 1, -1))


class Mapper(Module):
    """z -> K soft tokens: wide projection, learned positions, one attention
    block, then a shared per-token projection to the decoder width."""

    def __init__(self, rng: np.random.Generator, dim: int = LATENT_DIM, width: int = 128,
                 k: int = PROMPT_LEN, out: int = EMBED_DIM, heads: int = 2, rate: float = 0.1):
        self.inp = Linear(dim, k * width, rng)
        self.pos = _normal(rng, (k, width), 0.02)
        self.ln = LayerNorm(width)
        self.attn = SelfAttention(width, heads, rng, rate)
        self.up = Linear(width, out, rng)
        self.k, self.width, self.rate = k, width, rate

    def __call__(self, z: Tensor, rng: np.random.Generator | None = None, training: bool = False) -> Tensor:
        b = z.shape[0]
        x = reshape(self.inp(z), (b, self.k, self.width)) + self.pos
        x = x + dropout(self.attn(self.ln(x), None, rng, training), self.rate, rng, training)
        return self.up(x)

    def map(self, z: np.ndarray) -> np.ndarray:
        with no_grad():
            return self(Tensor(np.atleast_2d(z))).data


def masked_token_nll(logits: Tensor, targets: np.ndarray, mask: np.ndarray) -> Tensor:
    """Mean over programs of the per-token mean NLL (each program weighted 1/N, each token 1/T_i)."""
    logp = log_softmax(logits, axis=-1)
    onehot = np.zeros(logits.shape)
    np.put_along_axis(onehot, targets[..., None], 1.0, axis=-1)
    weights = mask / mask.sum(axis=1, keepdims=True) / mask.shape[0]
    return -sum_(logp * (onehot * weights[..., None]))
