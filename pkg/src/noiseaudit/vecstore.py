"""Binary codec for id-aligned float matrices and an exact cosine kNN engine.

File layout (little-endian throughout, no padding, no compression):

    magic "NRCM" (4 bytes) | version u32 = 1 | kind u8 (0 embeddings,
    1 predictions) | count u64 | dim u32
    | count id entries, each u16 byte-length + UTF-8 bytes
    | kind 1 only: dim label entries in the same string encoding
    | count x dim float32 values, row-major

Values are stored in 32-bit floats; all similarity arithmetic accumulates
in 64-bit. Embedding rows are unit-L2-normalized at load time, so cosine
equals dot product on stored rows, but the search engine still divides by
the recomputed norms to stay interchangeable with a plain brute-force
scan.
"""

from __future__ import annotations

import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import NoiseAuditError

MAGIC = b"NRCM"
VERSION = 1
KIND_EMBEDDINGS = 0
KIND_PREDICTIONS = 1

_HEADER = struct.Struct("<4sIBQI")
_QUERY_BLOCK = 256

NeighborList = list[tuple[str, float]]


def _check_ids(ids: Sequence[str], n_rows: int) -> tuple[str, ...]:
    ids = tuple(ids)
    if len(ids) != n_rows:
        raise NoiseAuditError(f"id count {len(ids)} does not match row count {n_rows}")
    if len(set(ids)) != len(ids):
        seen = set()
        for i in ids:
            if i in seen:
                raise NoiseAuditError(f"duplicate id: {i!r}")
            seen.add(i)
    return ids


def _as_f32_matrix(rows, what: str) -> np.ndarray:
    arr = np.asarray(rows, dtype=np.float32)
    if arr.ndim != 2:
        raise NoiseAuditError(f"{what} must be a 2-d matrix, got shape {arr.shape}")
    bad = ~np.isfinite(arr)
    if bad.any():
        row = int(np.argwhere(bad)[0][0])
        raise NoiseAuditError(f"{what} contains a non-finite value at row {row}")
    return arr


@dataclass(frozen=True)
class EmbeddingSet:
    """Id-aligned model representations, unit-L2-normalized at construction."""

    ids: tuple[str, ...]
    rows: np.ndarray

    def __post_init__(self):
        rows = _as_f32_matrix(self.rows, "embedding matrix")
        object.__setattr__(self, "ids", _check_ids(self.ids, rows.shape[0]))
        r64 = rows.astype(np.float64)
        norms = np.sqrt((r64 * r64).sum(axis=1))
        zero = norms == 0.0
        if zero.any():
            raise NoiseAuditError(f"zero-norm embedding row at index {int(np.argmax(zero))}")
        normalized = (r64 / norms[:, None]).astype(np.float32)
        normalized.flags.writeable = False
        object.__setattr__(self, "rows", normalized)

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {iid: i for i, iid in enumerate(self.ids)}

    def __contains__(self, instance_id: str) -> bool:
        return instance_id in self._index

    def row(self, instance_id: str) -> np.ndarray:
        try:
            return self.rows[self._index[instance_id]]
        except KeyError:
            raise NoiseAuditError(f"no embedding for id {instance_id!r}") from None

    def select(self, instance_ids: Iterable[str]) -> "EmbeddingSet":
        """Restrict to the given ids, preserving this set's row order."""
        keep = set(instance_ids)
        missing = keep - set(self._index)
        if missing:
            raise NoiseAuditError(f"no embedding for id {sorted(missing)[0]!r}")
        idx = [i for i, iid in enumerate(self.ids) if iid in keep]
        return EmbeddingSet(tuple(self.ids[i] for i in idx), self.rows[idx])

    def gather(self, instance_ids: Sequence[str]) -> np.ndarray:
        """Rows for the given ids, in the given order."""
        return self.rows[[self._index_of(i) for i in instance_ids]]

    def _index_of(self, instance_id: str) -> int:
        try:
            return self._index[instance_id]
        except KeyError:
            raise NoiseAuditError(f"no embedding for id {instance_id!r}") from None


@dataclass(frozen=True)
class PredictionSet:
    """Id-aligned per-label probability rows in label-space order."""

    ids: tuple[str, ...]
    label_order: tuple[str, ...]
    rows: np.ndarray

    def __post_init__(self):
        rows = _as_f32_matrix(self.rows, "prediction matrix")
        object.__setattr__(self, "ids", _check_ids(self.ids, rows.shape[0]))
        object.__setattr__(self, "label_order", tuple(self.label_order))
        if rows.shape[1] != len(self.label_order):
            raise NoiseAuditError(
                f"prediction width {rows.shape[1]} does not match {len(self.label_order)} labels"
            )
        if (rows < 0).any():
            row = int(np.argwhere((rows < 0).any(axis=1))[0][0])
            raise NoiseAuditError(f"negative probability at row {row}")
        sums = rows.astype(np.float64).sum(axis=1)
        off = np.abs(sums - 1.0) > 1e-4
        if off.any():
            row = int(np.argmax(off))
            raise NoiseAuditError(
                f"probability row {row} sums to {sums[row]:.6f}, expected 1 within 1e-4"
            )
        rows = rows.copy()
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)

    def __len__(self) -> int:
        return len(self.ids)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {iid: i for i, iid in enumerate(self.ids)}

    def __contains__(self, instance_id: str) -> bool:
        return instance_id in self._index

    def row(self, instance_id: str) -> np.ndarray:
        try:
            return self.rows[self._index[instance_id]]
        except KeyError:
            raise NoiseAuditError(f"no prediction row for id {instance_id!r}") from None

    def argmax_labels(self) -> list[str]:
        """Highest-probability label per row; ties go to the lower label index."""
        idx = np.argmax(self.rows, axis=1)
        return [self.label_order[i] for i in idx]


def cosine(a, b) -> float:
    """Cosine similarity with float64 accumulation."""
    av = np.asarray(a, dtype=np.float64).ravel()
    bv = np.asarray(b, dtype=np.float64).ravel()
    if av.shape != bv.shape:
        raise NoiseAuditError(f"dimension mismatch: {av.shape[0]} vs {bv.shape[0]}")
    na = float(np.sqrt((av * av).sum()))
    nb = float(np.sqrt((bv * bv).sum()))
    if na == 0.0 or nb == 0.0:
        raise NoiseAuditError("cosine is undefined for zero-norm input")
    return float((av * bv).sum() / (na * nb))


def _worker_count(threads: int | None) -> int:
    if threads is not None:
        return max(1, threads)
    env = os.environ.get("NOISEAUDIT_THREADS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def _topk_rows(sims: np.ndarray, k: int) -> list[np.ndarray]:
    # Stable argsort on the negated sims: ties resolve to the lower corpus index.
    out = []
    for row in sims:
        order = np.argsort(-row, kind="stable")
        out.append(order[:k])
    return out


def knn_many(
    queries,
    corpus: EmbeddingSet,
    k: int,
    threads: int | None = None,
) -> list[NeighborList]:
    """Exact k-nearest-neighbor lists for many query vectors.

    Pure per query: results are independent of block scheduling. If the
    corpus is smaller than k, every list contains the whole corpus.
    """
    if k < 1:
        raise NoiseAuditError(f"k must be >= 1, got {k}")
    if len(corpus) == 0:
        raise NoiseAuditError("cannot search an empty corpus")
    q = np.asarray(queries, dtype=np.float64)
    if q.ndim == 1:
        q = q[None, :]
    if q.ndim != 2 or q.shape[1] != corpus.dim:
        raise NoiseAuditError(
            f"query dimension {q.shape[-1] if q.ndim else '?'} does not match corpus dim {corpus.dim}"
        )
    qnorms = np.sqrt((q * q).sum(axis=1))
    if (qnorms == 0.0).any():
        raise NoiseAuditError("cosine is undefined for zero-norm input")

    c64 = corpus.rows.astype(np.float64)
    cnorms = np.sqrt((c64 * c64).sum(axis=1))
    kk = min(k, len(corpus))

    def run_block(start: int) -> list[NeighborList]:
        stop = min(start + _QUERY_BLOCK, q.shape[0])
        sims = (q[start:stop] @ c64.T) / np.outer(qnorms[start:stop], cnorms)
        block_out = []
        for r, order in enumerate(_topk_rows(sims, kk)):
            block_out.append([(corpus.ids[j], float(sims[r, j])) for j in order])
        return block_out

    starts = range(0, q.shape[0], _QUERY_BLOCK)
    workers = _worker_count(threads)
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(run_block, starts))
    else:
        blocks = [run_block(s) for s in starts]
    return [nl for block in blocks for nl in block]


def knn(
    query,
    corpus: EmbeddingSet,
    k: int,
    mask: Callable[[str], bool] | None = None,
) -> NeighborList:
    """The k corpus rows with highest cosine to the query.

    Ties break toward the lower corpus index; an optional mask predicate
    restricts candidate ids. Fewer than k candidates returns all of them.
    """
    if mask is None:
        return knn_many(query, corpus, k)[0]
    keep = [iid for iid in corpus.ids if mask(iid)]
    if not keep:
        raise NoiseAuditError("no corpus ids pass the mask")
    return knn_many(query, corpus.select(keep), k)[0]


def _pack_str(s: str) -> bytes:
    b = s.encode("utf-8")
    if len(b) > 0xFFFF:
        raise NoiseAuditError(f"string too long for format ({len(b)} bytes)")
    return struct.pack("<H", len(b)) + b


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise NoiseAuditError(f"{self.path}: truncated payload while reading {what}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def take_str(self, what: str) -> str:
        (n,) = struct.unpack("<H", self.take(2, what))
        return self.take(n, what).decode("utf-8")


def write_matrix(mset: EmbeddingSet | PredictionSet, path: str | Path) -> None:
    """Serialize an embedding or prediction set to the binary format."""
    is_pred = isinstance(mset, PredictionSet)
    kind = KIND_PREDICTIONS if is_pred else KIND_EMBEDDINGS
    n, dim = mset.rows.shape
    parts = [_HEADER.pack(MAGIC, VERSION, kind, n, dim)]
    for iid in mset.ids:
        parts.append(_pack_str(iid))
    if is_pred:
        for label in mset.label_order:
            parts.append(_pack_str(label))
    parts.append(np.ascontiguousarray(mset.rows, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_matrix(path: str | Path) -> EmbeddingSet | PredictionSet:
    """Read and validate a matrix file; embeddings get normalized on load."""
    data = Path(path).read_bytes()
    r = _Reader(data, path)
    magic, version, kind, count, dim = _HEADER.unpack(r.take(_HEADER.size, "header"))
    if magic != MAGIC:
        raise NoiseAuditError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise NoiseAuditError(f"{path}: unsupported format version {version}")
    if kind not in (KIND_EMBEDDINGS, KIND_PREDICTIONS):
        raise NoiseAuditError(f"{path}: unknown matrix kind {kind}")
    if dim < 1:
        raise NoiseAuditError(f"{path}: dim must be >= 1, got {dim}")
    ids = tuple(r.take_str(f"id {i}") for i in range(count))
    labels: tuple[str, ...] = ()
    if kind == KIND_PREDICTIONS:
        labels = tuple(r.take_str(f"label {i}") for i in range(dim))
    payload = r.take(count * dim * 4, "float payload")
    if r.pos != len(data):
        raise NoiseAuditError(f"{path}: {len(data) - r.pos} trailing bytes after payload")
    rows = np.frombuffer(payload, dtype="<f4").reshape(count, dim)
    try:
        if kind == KIND_EMBEDDINGS:
            return EmbeddingSet(ids, rows)
        return PredictionSet(ids, labels, rows)
    except NoiseAuditError as exc:
        raise NoiseAuditError(f"{path}: {exc}") from None
