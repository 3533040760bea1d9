"""Reference encoders/classifiers and the plugin spec parser.

An encoder is any callable mapping a Record to a fixed-dimension float
vector; a classifier maps (Record, labels) to a full probability row in
label order. Specs select them on the command line:

    hashing:dim=64,seed=0
    uniform
    centroid:train=train.jsonl,dim=64,temperature=10
    onehot:train=train.jsonl,dim=64
    some.module:factory_name:dim=8      (user-supplied plugin)

A plugin factory receives the parsed keyword arguments and returns the
callable. Everything here is deterministic: token hashing uses blake2b,
never Python's salted hash().
"""

from __future__ import annotations

import hashlib
import importlib
from typing import Callable, Sequence

import numpy as np

from .records import ExportError, Record


def _stable_hash(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


class HashingEncoder:
    """Signed feature hashing over tokens and entity type markers.

    A record whose features fully cancel would produce a zero vector,
    which the matrix format rejects; such rows fall back to a unit spike
    in bucket 0.
    """

    def __init__(self, dim: int = 64, seed: int = 0):
        if dim < 2:
            raise ExportError(f"hashing dim must be >= 2, got {dim}")
        self.dim = int(dim)
        self.seed = int(seed)

    def _features(self, record: Record):
        yield from record.tokens
        yield f"subj_type={record.subj_type}"
        yield f"obj_type={record.obj_type}"

    def __call__(self, record: Record) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for feat in self._features(record):
            h = _stable_hash(f"{self.seed}\x00{feat}")
            sign = 1.0 if h & 1 else -1.0
            vec[(h >> 1) % self.dim] += sign
        if not vec.any():
            vec[0] = 1.0
        return vec


class UniformClassifier:
    """Assigns every label the same probability."""

    def __call__(self, record: Record, labels: Sequence[str]) -> np.ndarray:
        return np.full(len(labels), 1.0 / len(labels), dtype=np.float64)


class CentroidClassifier:
    """Softmax over cosine similarity to per-label centroids of hashed features.

    With hard=True the row is one-hot on the nearest centroid instead.
    Labels absent from the training data score as if at similarity -1.
    """

    def __init__(self, train: str, dim: int = 64, seed: int = 0,
                 temperature: float = 10.0, hard: bool = False):
        from .records import read_records

        self.encoder = HashingEncoder(dim=dim, seed=seed)
        self.temperature = float(temperature)
        self.hard = bool(hard)
        records = read_records(train)
        if not records:
            raise ExportError(f"{train}: no training records for the centroid classifier")
        sums: dict[str, np.ndarray] = {}
        for rec in records:
            vec = self.encoder(rec)
            norm = np.linalg.norm(vec)
            if norm == 0.0:
                continue
            sums.setdefault(rec.relation, np.zeros(self.encoder.dim)).__iadd__(vec / norm)
        self.centroids = {}
        for label, total in sums.items():
            norm = np.linalg.norm(total)
            if norm > 0.0:
                self.centroids[label] = total / norm

    def __call__(self, record: Record, labels: Sequence[str]) -> np.ndarray:
        vec = self.encoder(record)
        norm = np.linalg.norm(vec)
        sims = np.full(len(labels), -1.0, dtype=np.float64)
        for j, label in enumerate(labels):
            centroid = self.centroids.get(label)
            if centroid is not None and norm > 0.0:
                sims[j] = float(vec @ centroid) / norm
        if self.hard:
            row = np.zeros(len(labels), dtype=np.float64)
            row[int(np.argmax(sims))] = 1.0
            return row
        z = np.exp(self.temperature * (sims - sims.max()))
        return z / z.sum()


ENCODERS: dict[str, Callable] = {"hashing": HashingEncoder}
CLASSIFIERS: dict[str, Callable] = {
    "uniform": UniformClassifier,
    "centroid": CentroidClassifier,
    "onehot": lambda **kw: CentroidClassifier(hard=True, **kw),
}


def _parse_params(text: str) -> dict:
    params: dict = {}
    if not text:
        return params
    for part in text.split(","):
        if "=" not in part:
            raise ExportError(f"malformed spec parameter {part!r}; expected key=value")
        key, value = part.split("=", 1)
        try:
            params[key] = int(value)
        except ValueError:
            try:
                params[key] = float(value)
            except ValueError:
                params[key] = value
    return params


def build_from_spec(spec: str, registry: dict[str, Callable]):
    """Instantiate `name[:key=val,...]` from the registry, or import
    `module:attr[:key=val,...]` as a user plugin factory."""
    parts = spec.split(":")
    if parts[0] in registry:
        if len(parts) > 2:
            raise ExportError(f"malformed spec {spec!r}")
        return registry[parts[0]](**_parse_params(parts[1] if len(parts) == 2 else ""))
    if len(parts) >= 2:
        module_name, attr = parts[0], parts[1]
        try:
            factory = getattr(importlib.import_module(module_name), attr)
        except (ImportError, AttributeError) as exc:
            raise ExportError(f"cannot load plugin {spec!r}: {exc}") from None
        return factory(**_parse_params(parts[2] if len(parts) == 3 else ""))
    raise ExportError(
        f"unknown spec {spec!r}; expected one of {sorted(registry)} or module:attr"
    )
