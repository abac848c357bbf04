"""Flat key = value run configuration.

Precedence, last write wins: dataclass defaults, then the --config file in
line order, then dedicated command-line flags, then --set overrides in order.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from ..dsl.vocab import Task

CODE_VERSION = "0.1.0"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    task: str = "TSP"
    variant: str = "LHS"
    seed: int = 0
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    out: str = "results"
    parallelism: int = 1
    # corpus
    corpus_tasks: str = "ALL"
    corpus_seeds_per_task: int = 100
    corpus_factor: int = 5
    obp_search_items: int = 5000
    # autoencoder
    ae_epochs: int = 100
    ae_batch: int = 64
    ae_lr: float = 1e-3
    latent_noise: float = 0.05
    # flow
    flow_epochs: int = 300
    flow_batch: int = 128
    flow_noise: float = 0.01
    # surrogate
    surrogate_epochs: int = 20
    surrogate_batch: int = 256
    tau: float = 1.0
    pair_cap: int = 50000
    # mapper
    mapper_epochs: int = 40
    mapper_batch: int = 64
    # search
    budget: int = 100
    candidates: int = 5
    steps: int = 5
    eta: float = 0.3
    pool: int = 10
    temperature: float = 0.7
    top_p: float = 0.9
    # eval
    policy: str = ""
    count: int = 0
    size: int = 0
    family: str = ""

    def validate(self) -> None:
        try:
            Task(self.task.upper())
        except ValueError:
            raise ConfigError(f"unknown task {self.task!r}") from None
        self.task = self.task.upper()
        self.variant = self.variant.upper()
        if self.variant not in ("LHS", "NO_FLOW", "NO_GRAD"):
            raise ConfigError(f"unknown variant {self.variant!r}")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if self.budget < 0 or self.parallelism < 1:
            raise ConfigError("budget must be >= 0 and parallelism >= 1")

    def snapshot(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    def identity(self) -> dict:
        """Settings that determine results; the output location is not one of them."""
        d = asdict(self)
        d.pop("out")
        return d

    def run_id(self, command: str, extra: str = "") -> str:
        blob = json.dumps({"command": command, "extra": extra, "config": self.identity(),
                           "code": CODE_VERSION}, sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.identity(), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _TYPES[key]
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind.startswith("tuple"):
            return _seed_list(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def _seed_list(raw: str) -> tuple[int, ...]:
    out: list[int] = []
    for part in raw.replace(" ", "").split(","):
        if not part:
            continue
        if ".." in part:
            a, b = part.split("..")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def apply(cfg: RunConfig, key: str, raw: str) -> None:
    key = key.strip().replace("-", "_")
    if key not in _TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    setattr(cfg, key, _coerce(key, raw))


def parse_lines(text: str, cfg: RunConfig) -> None:
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        key, raw = line.split("=", 1)
        apply(cfg, key, raw)


def load_config(path: str | Path | None, overrides: list[tuple[str, str]]) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        parse_lines(p.read_text(), cfg)
    for key, raw in overrides:
        apply(cfg, key, raw)
    cfg.validate()
    return cfg
