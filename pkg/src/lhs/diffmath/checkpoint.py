"""Parameter container format.

Layout: one version byte, a little-endian uint32 header length, the UTF-8
JSON header (array names, shapes, step counter, free-form metadata), then
every array as raw little-endian float64 in header order.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Any

import numpy as np

VERSION = 1


def dumps(arrays: dict[str, np.ndarray], step: int = 0, meta: dict[str, Any] | None = None) -> bytes:
    names = list(arrays)
    header = {
        "names": names,
        "shapes": [list(np.shape(arrays[n])) for n in names],
        "step": int(step),
        "meta": meta or {},
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    body = b"".join(np.ascontiguousarray(arrays[n], dtype="<f8").tobytes() for n in names)
    return bytes([VERSION]) + struct.pack("<I", len(head)) + head + body


def loads(blob: bytes) -> tuple[dict[str, np.ndarray], int, dict[str, Any]]:
    if not blob or blob[0] != VERSION:
        raise ValueError(f"unsupported checkpoint version byte {blob[:1]!r}")
    (n,) = struct.unpack("<I", blob[1:5])
    header = json.loads(blob[5 : 5 + n].decode("utf-8"))
    offset = 5 + n
    arrays = {}
    for name, shape in zip(header["names"], header["shapes"]):
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape)
        arrays[name] = arr.astype(np.float64)
        offset += 8 * count
    if offset != len(blob):
        raise ValueError("trailing bytes in checkpoint")
    return arrays, int(header["step"]), header["meta"]


def save(path: str | Path, arrays: dict[str, np.ndarray], step: int = 0, meta: dict[str, Any] | None = None) -> None:
    Path(path).write_bytes(dumps(arrays, step, meta))


def load(path: str | Path) -> tuple[dict[str, np.ndarray], int, dict[str, Any]]:
    return loads(Path(path).read_bytes())


def digest(arrays: dict[str, np.ndarray]) -> str:
    """Content hash of named arrays, used for freeze-integrity checks."""
    h = hashlib.sha256()
    for name in sorted(arrays):
        h.update(name.encode())
        h.update(np.ascontiguousarray(arrays[name], dtype="<f8").tobytes())
    return h.hexdigest()
