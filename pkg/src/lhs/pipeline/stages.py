"""Training stages and their checkpoints, shared by the command line and the test suites."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..diffmath import Module, checkpoint
from ..dsl import CorpusEntry, Program, Task
from ..flow import Flow, FlowConfig, flow_nll, flow_report, train_flow
from ..latent.models import Bottleneck, Decoder, Encoder, Mapper
from ..latent.train import (
    AutoencoderConfig,
    AutoencoderResult,
    MapperConfig,
    greedy_reconstruction,
    mapper_nll,
    pretrain_autoencoder,
    split_indices,
    train_mapper,
)
from ..surrogate import Surrogate, SurrogateConfig, fit_task_surrogate
from .corpus import scored


class MissingArtifact(FileNotFoundError):
    def __init__(self, stage: str, path: Path):
        super().__init__(f"{stage} checkpoint required (expected {path})")
        self.stage = stage


# -- checkpoints -----------------------------------------------------------------

def save_module(path: str | Path, module: Module, meta: dict | None = None) -> None:
    checkpoint.save(path, module.state_arrays(), meta=meta or {})


def _load_into(module: Module, path: Path) -> dict:
    arrays, _, meta = checkpoint.load(path)
    module.load_arrays(arrays)
    module.freeze()
    return meta


@dataclass
class Autoencoder:
    encoder: Encoder
    decoder: Decoder
    bottleneck: Bottleneck


def save_autoencoder(path: str | Path, ae: Autoencoder | AutoencoderResult, meta: dict | None = None) -> None:
    arrays = {}
    for prefix, m in (("enc.", ae.encoder), ("dec.", ae.decoder), ("neck.", ae.bottleneck)):
        arrays.update({prefix + k: v for k, v in m.state_arrays().items()})
    checkpoint.save(path, arrays, meta=meta or {})


def load_autoencoder(path: str | Path) -> Autoencoder:
    path = Path(path)
    if not path.exists():
        raise MissingArtifact("autoencoder", path)
    arrays, _, _ = checkpoint.load(path)
    rng = np.random.default_rng(0)
    ae = Autoencoder(Encoder(rng), Decoder(rng), Bottleneck(rng))
    for prefix, m in (("enc.", ae.encoder), ("dec.", ae.decoder), ("neck.", ae.bottleneck)):
        m.load_arrays({k[len(prefix):]: v for k, v in arrays.items() if k.startswith(prefix)})
        m.freeze()
    return ae


def save_flow(path: str | Path, flow: Flow, meta: dict | None = None) -> None:
    save_module(path, flow, {**flow.meta(), **(meta or {})})


def load_flow(path: str | Path) -> Flow:
    path = Path(path)
    if not path.exists():
        raise MissingArtifact("flow", path)
    _, _, meta = checkpoint.load(path)
    flow = Flow(meta["dim"], meta["n_layers"], np.random.default_rng(0), meta["hidden"])
    _load_into(flow, path)
    if [c.parity for c in flow.couplings] != meta["parities"]:
        raise ValueError("flow checkpoint mask parities do not match")
    for norm in flow.norms:
        norm.initialized = bool(meta["initialized"])
    return flow


def save_surrogate(path: str | Path, model: Surrogate, meta: dict | None = None) -> None:
    save_module(path, model, {**model.arch, **(meta or {})})


def load_surrogate(path: str | Path, stage: str = "surrogate") -> Surrogate:
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(stage, path)
    _, _, meta = checkpoint.load(path)
    model = Surrogate(np.random.default_rng(0), meta["dim"], meta["hidden"], meta["dropout"], meta["tau"])
    _load_into(model, path)
    return model


def load_mapper(path: str | Path) -> Mapper:
    path = Path(path)
    if not path.exists():
        raise MissingArtifact("mapper", path)
    mapper = Mapper(np.random.default_rng(0))
    _load_into(mapper, path)
    return mapper


# -- stages ----------------------------------------------------------------------

def stage_autoencoder(entries: Sequence[CorpusEntry], cfg: AutoencoderConfig, seed: int) -> AutoencoderResult:
    return pretrain_autoencoder([e.program for e in entries], cfg, np.random.default_rng(seed))


def stage_flow(encoder: Encoder, programs: Sequence[Program], cfg: FlowConfig, seed: int,
               holdout: float = 0.1) -> tuple[Flow, dict]:
    """Pooled flow over all corpus latents; a program-level holdout measures generalization."""
    rng = np.random.default_rng(seed)
    z = encoder.encode(list(programs))
    tr, ho = split_indices(len(z), holdout, rng)
    init = Flow(z.shape[1], cfg.n_layers, np.random.default_rng(seed), cfg.hidden)
    init.initialize(z[tr][rng.permutation(len(tr))[: cfg.batch_size]])
    nll_init = flow_nll(init, z[ho])
    flow, hist = train_flow(z[tr], cfg, rng)
    report = flow_report(flow, hist, z[tr], z[ho], nll_init, cfg)
    report["train_points"], report["heldout_points"] = len(tr), len(ho)
    return flow, report


def surrogate_inputs(entries: Sequence[CorpusEntry], task: Task, encoder: Encoder,
                     flow: Flow | None) -> tuple[np.ndarray, list[float], list[str]]:
    from ..flow import flow_forward

    rows = scored(entries, task)
    z = encoder.encode([e.program for e in rows])
    x = z if flow is None else flow_forward(flow, z)[0]
    return x, [e.score for e in rows], [e.program.id for e in rows]


def stage_surrogate(entries: Sequence[CorpusEntry], task: Task, encoder: Encoder, flow: Flow | None,
                    cfg: SurrogateConfig, seed: int) -> tuple[Surrogate, dict]:
    """One surrogate per task on prior coordinates, or on raw latents when ``flow`` is None."""
    x, s, ids = surrogate_inputs(entries, task, encoder, flow)
    model, report = fit_task_surrogate(x, s, ids, cfg, seed)
    report["task"] = task.value
    report["space"] = "latent" if flow is None else "prior"
    return model, report


def stage_mapper(entries: Sequence[CorpusEntry], ae: Autoencoder | AutoencoderResult, cfg: MapperConfig,
                 seed: int, holdout: float = 0.1, recon_sample: int = 200) -> tuple[Mapper, dict]:
    rng = np.random.default_rng(seed)
    programs = [e.program for e in entries]
    z = ae.encoder.encode(programs)
    tr, ho = split_indices(len(programs), holdout, rng)
    train_p, held_p = [programs[i] for i in tr], [programs[i] for i in ho]
    before = ae.decoder.digest()
    untrained = Mapper(np.random.default_rng(seed + 1))
    nll_untrained = mapper_nll(untrained, ae.decoder, z[ho], held_p)
    mapper, hist = train_mapper(train_p, z[tr], ae.decoder, cfg, rng, encoder=ae.encoder)
    sample = tr[:recon_sample]
    report = {
        "config": asdict(cfg),
        "epoch_loss": hist.epoch_loss,
        "heldout_nll_untrained": nll_untrained,
        "heldout_nll": mapper_nll(mapper, ae.decoder, z[ho], held_p),
        "train_greedy_reconstruction": greedy_reconstruction(mapper, ae.decoder, z[sample],
                                                             [programs[i] for i in sample]),
        "heldout_greedy_reconstruction": greedy_reconstruction(mapper, ae.decoder, z[ho], held_p),
        "decoder_digest_before": before,
        "decoder_digest_after": ae.decoder.digest(),
    }
    mapper.freeze()
    return mapper, report
