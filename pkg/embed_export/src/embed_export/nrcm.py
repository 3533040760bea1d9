"""Writer for the NRCM matrix format consumed by the auditing toolkit.

Layout (little-endian, no padding): magic "NRCM", version u32 = 1, kind u8
(0 embeddings, 1 predictions), count u64, dim u32, `count` ids as u16
byte-length + UTF-8, for kind 1 `dim` label strings in the same encoding,
then count x dim float32 values row-major.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .records import ExportError

MAGIC = b"NRCM"
VERSION = 1
KIND_EMBEDDINGS = 0
KIND_PREDICTIONS = 1

_HEADER = struct.Struct("<4sIBQI")


def _pack_str(s: str) -> bytes:
    b = s.encode("utf-8")
    if len(b) > 0xFFFF:
        raise ExportError(f"string too long for the format ({len(b)} bytes)")
    return struct.pack("<H", len(b)) + b


def write_nrcm(
    path: str | Path,
    kind: int,
    ids: Sequence[str],
    rows: np.ndarray,
    labels: Sequence[str] | None = None,
) -> None:
    rows = np.asarray(rows, dtype=np.float32)
    if rows.ndim != 2:
        raise ExportError(f"matrix must be 2-d, got shape {rows.shape}")
    n, dim = rows.shape
    if len(ids) != n:
        raise ExportError(f"{len(ids)} ids for {n} rows")
    if kind == KIND_PREDICTIONS:
        if labels is None or len(labels) != dim:
            raise ExportError("prediction files need exactly one label per column")
    elif kind != KIND_EMBEDDINGS:
        raise ExportError(f"unknown kind {kind}")
    parts = [_HEADER.pack(MAGIC, VERSION, kind, n, dim)]
    parts.extend(_pack_str(i) for i in ids)
    if kind == KIND_PREDICTIONS:
        parts.extend(_pack_str(l) for l in labels)
    parts.append(np.ascontiguousarray(rows, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))
