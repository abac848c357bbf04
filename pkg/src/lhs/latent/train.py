"""Autoencoder pretraining (encoder + decoder) and mapper training against the frozen pair."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..diffmath import ContractError, Tensor, no_grad
from ..dsl.program import Program
from ..training import FitConfig, History, fit
from .decode import decode
from .models import Bottleneck, Decoder, Encoder, Mapper, masked_token_nll
from .tokens import context_batch, length_batches, teacher_batch


@dataclass
class AutoencoderConfig:
    epochs: int = 100
    batch_size: int = 64
    lr: float = 1e-3
    weight_decay: float = 0.0
    holdout: float = 0.1
    latent_noise: float = 0.05
    min_corpus: int = 500


@dataclass
class MapperConfig:
    epochs: int = 40
    batch_size: int = 64
    lr: float = 1e-3
    weight_decay: float = 0.0


@dataclass
class AutoencoderResult:
    encoder: Encoder
    decoder: Decoder
    bottleneck: Bottleneck
    history: History
    report: dict = field(default_factory=dict)


def split_indices(n: int, fraction: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    perm = rng.permutation(n)
    k = int(round(n * fraction))
    return np.sort(perm[k:]), np.sort(perm[:k])


def _families(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(0, 3, size=n)


def teacher_accuracy(encoder: Encoder, decoder: Decoder, bottleneck: Bottleneck,
                     programs: Sequence[Program], family: int = 0) -> float:
    """Teacher-forced next-token argmax accuracy (targets include EOS)."""
    hits = total = 0
    with no_grad():
        for i in range(0, len(programs), 128):
            chunk = list(programs[i:i + 128])
            inputs, targets, mask = teacher_batch(chunk)
            ctx = context_batch([p.task for p in chunk], [family] * len(chunk))
            z = encoder(chunk)
            logits = decoder(ctx, bottleneck(z), inputs).data
            pred = logits.argmax(axis=-1)
            hits += float(((pred == targets) * mask).sum())
            total += float(mask.sum())
    return hits / max(total, 1.0)


def pretrain_autoencoder(programs: Sequence[Program], cfg: AutoencoderConfig,
                         rng: np.random.Generator) -> AutoencoderResult:
    """Jointly train encoder + decoder as a sequence autoencoder, then freeze both."""
    programs = list(programs)
    tasks = {p.task for p in programs}
    if len(programs) < cfg.min_corpus:
        raise ContractError(f"autoencoder needs >= {cfg.min_corpus} programs, got {len(programs)}")
    if cfg.min_corpus >= 500 and len(tasks) < 4:
        raise ContractError("autoencoder corpus must span all tasks")
    encoder, decoder, bottleneck = Encoder(rng), Decoder(rng), Bottleneck(rng)
    train_idx, held_idx = split_indices(len(programs), cfg.holdout, rng)
    train = [programs[i] for i in train_idx]
    held = [programs[i] for i in held_idx]
    lengths = [len(p) for p in train]

    params = {}
    for prefix, m in (("enc.", encoder), ("dec.", decoder), ("neck.", bottleneck)):
        params.update({prefix + k: v for k, v in m.parameters().items()})

    def batches(epoch):
        return length_batches(lengths, cfg.batch_size, rng)

    def loss(idx, r):
        chunk = [train[i] for i in idx]
        inputs, targets, mask = teacher_batch(chunk)
        ctx = context_batch([p.task for p in chunk], _families(r, len(chunk)))
        z = encoder(chunk)
        if cfg.latent_noise > 0:
            z = z + r.normal(0.0, cfg.latent_noise, size=z.shape)
        logits = decoder(ctx, bottleneck(z), inputs, r, training=True)
        return masked_token_nll(logits, targets, mask)

    hist = fit(params, batches, loss, FitConfig(cfg.epochs, cfg.lr, cfg.weight_decay), rng, name="autoencoder")
    encoder.freeze()
    decoder.freeze()
    bottleneck.freeze()
    report = {
        "config": asdict(cfg),
        "train_programs": len(train),
        "heldout_programs": len(held),
        "epoch_loss": hist.epoch_loss,
        "train_token_accuracy": teacher_accuracy(encoder, decoder, bottleneck, train[:500]),
        "heldout_token_accuracy": teacher_accuracy(encoder, decoder, bottleneck, held) if held else None,
        "encoder_digest": encoder.digest(),
        "decoder_digest": decoder.digest(),
    }
    return AutoencoderResult(encoder, decoder, bottleneck, hist, report)


# -- mapper ----------------------------------------------------------------------

def mapper_nll(mapper: Mapper, decoder: Decoder, z: np.ndarray, programs: Sequence[Program],
               family: int | None = None, rng: np.random.Generator | None = None) -> float:
    """Per-token NLL averaged per program (eval mode). ``family=None`` cycles 0, 1, 2."""
    total = 0.0
    with no_grad():
        for i in range(0, len(programs), 128):
            chunk = list(programs[i:i + 128])
            fams = [family if family is not None else (i + j) % 3 for j in range(len(chunk))]
            inputs, targets, mask = teacher_batch(chunk)
            ctx = context_batch([p.task for p in chunk], fams)
            h = mapper(Tensor(z[i:i + len(chunk)]))
            logits = decoder(ctx, h, inputs)
            total += masked_token_nll(logits, targets, mask).item() * len(chunk)
    return total / len(programs)


def greedy_reconstruction(mapper: Mapper, decoder: Decoder, z: np.ndarray,
                          programs: Sequence[Program], family: int = 0) -> float:
    """Fraction of programs decoded token-exactly from their own latent at temperature 0."""
    hits = 0
    rng = np.random.default_rng(0)
    for i in range(0, len(programs), 100):
        chunk = list(programs[i:i + 100])
        ctx = context_batch([p.task for p in chunk], [family] * len(chunk))
        h = mapper.map(z[i:i + len(chunk)])
        outs = decode(decoder, ctx, h, 0.0, 1.0, rng, max_len=max(len(p) for p in chunk) + 1)
        hits += sum(tuple(o) == p.tokens for o, p in zip(outs, chunk))
    return hits / len(programs)


def train_mapper(programs: Sequence[Program], z: np.ndarray, decoder: Decoder, cfg: MapperConfig,
                 rng: np.random.Generator, *, encoder: Encoder | None = None) -> tuple[Mapper, History]:
    """Fit the mapper by teacher-forced NLL through the frozen decoder.

    ``z`` holds the frozen encoder's latents for ``programs``. Each example
    draws one of the three prompt families.
    """
    if not decoder.frozen or (encoder is not None and not encoder.frozen):
        raise ContractError("mapper training needs a frozen encoder and decoder")
    programs = list(programs)
    mapper = Mapper(rng)
    lengths = [len(p) for p in programs]
    params = mapper.parameters()

    def batches(epoch):
        return length_batches(lengths, cfg.batch_size, rng)

    def loss(idx, r):
        chunk = [programs[i] for i in idx]
        inputs, targets, mask = teacher_batch(chunk)
        ctx = context_batch([p.task for p in chunk], _families(r, len(chunk)))
        h = mapper(Tensor(z[idx]), r, training=True)
        logits = decoder(ctx, h, inputs)
        return masked_token_nll(logits, targets, mask)

    hist = fit(params, batches, loss, FitConfig(cfg.epochs, cfg.lr, cfg.weight_decay), rng, name="mapper")
    return mapper, hist
