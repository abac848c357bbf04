"""JSON-lines corpus files: one program per line."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .program import Program, parse

SOURCES = ("seed", "syntactic", "parametric", "behavioral")


@dataclass
class CorpusEntry:
    program: Program
    source: str
    score: float | None = None

    def to_json(self) -> dict:
        return {
            "id": self.program.id,
            "task": self.program.task.value,
            "tokens": list(self.program.tokens),
            "source": self.source,
            "score": self.score,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CorpusEntry":
        program = parse(obj["tokens"], obj["task"])
        if program.id != obj["id"]:
            raise ValueError(f"corpus id mismatch for {obj['id']}")
        if obj["source"] not in SOURCES:
            raise ValueError(f"unknown source {obj['source']!r}")
        score = obj.get("score")
        return cls(program, obj["source"], None if score is None else float(score))


def write_corpus(path: str | Path, entries: Iterable[CorpusEntry]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for e in entries:
            fh.write(json.dumps(e.to_json(), sort_keys=True) + "\n")


def read_corpus(path: str | Path) -> list[CorpusEntry]:
    with open(path, encoding="utf-8") as fh:
        return [CorpusEntry.from_json(json.loads(line)) for line in fh if line.strip()]
