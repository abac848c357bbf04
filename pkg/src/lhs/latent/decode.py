"""Autoregressive sampling from the frozen decoder."""

from __future__ import annotations

import numpy as np

from ..diffmath import Tensor, no_grad
from ..dsl.vocab import MAX_TOKENS
from .models import Decoder
from .tokens import BOS_ID, EOS_ID, PAD_ID, ids_to_tokens

# PAD and BOS are never valid continuations; they are removed before sampling.
_BANNED = (PAD_ID, BOS_ID)


def token_distribution(logits: np.ndarray, temperature: float, top_p: float) -> np.ndarray:
    """Next-token probabilities after temperature scaling and nucleus truncation.

    ``logits`` is (B, V). Temperature <= 0 gives a one-hot argmax distribution.
    """
    logits = np.array(logits, dtype=np.float64)
    logits[:, list(_BANNED)] = -np.inf
    if temperature <= 0:
        out = np.zeros_like(logits)
        out[np.arange(len(logits)), np.argmax(logits, axis=1)] = 1.0
        return out
    z = logits / temperature
    z -= z.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    if top_p >= 1.0:
        return p
    order = np.argsort(-p, axis=1, kind="stable")
    sorted_p = np.take_along_axis(p, order, axis=1)
    cum = np.cumsum(sorted_p, axis=1)
    # keep every token whose preceding mass is still below top_p
    keep_sorted = (cum - sorted_p) < top_p
    keep = np.zeros_like(keep_sorted)
    np.put_along_axis(keep, order, keep_sorted, axis=1)
    p = np.where(keep, p, 0.0)
    return p / p.sum(axis=1, keepdims=True)


def _sample(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(len(probs))
    cum = np.cumsum(probs, axis=1)
    idx = (cum < u[:, None] * cum[:, -1:]).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


def decode(decoder: Decoder, context: np.ndarray, prefix: np.ndarray | None, temperature: float,
           top_p: float, rng: np.random.Generator, max_len: int = MAX_TOKENS) -> list[list[str]]:
    """Sample one token sequence per row. Stops at EOS or after ``max_len`` tokens.

    ``context`` is (B, 2) context ids, ``prefix`` is (B, P, e) or None.
    """
    max_len = min(max_len, MAX_TOKENS)
    b = len(context)
    seqs = np.full((b, 1), BOS_ID, dtype=np.int64)
    done = np.zeros(b, dtype=bool)
    pre = None if prefix is None else Tensor(np.asarray(prefix, dtype=np.float64))
    with no_grad():
        for _ in range(max_len):
            logits = decoder(context, pre, seqs).data[:, -1, :]
            nxt = _sample(token_distribution(logits, temperature, top_p), rng)
            nxt = np.where(done, PAD_ID, nxt)
            seqs = np.concatenate([seqs, nxt[:, None]], axis=1)
            done |= nxt == EOS_ID
            if done.all():
                break
    out = []
    for row in seqs[:, 1:]:
        ids = [int(i) for i in row if i != PAD_ID]
        out.append(ids_to_tokens(ids))
    return out
