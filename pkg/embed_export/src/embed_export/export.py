"""Export operations: run an encoder/classifier and write NRCM files.

Output ids always mirror the dataset ids in order. Nothing is written
until every row has been validated, so a failed export never leaves a
truncated file behind.
"""

from __future__ import annotations

from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .nrcm import KIND_EMBEDDINGS, KIND_PREDICTIONS, write_nrcm
from .records import ExportError, Record, read_labels, read_records


def encode_records(records: Sequence[Record], encoder: Callable) -> np.ndarray:
    rows = []
    dim = None
    for rec in records:
        vec = np.asarray(encoder(rec), dtype=np.float64).ravel()
        if dim is None:
            dim = vec.shape[0]
            if dim == 0:
                raise ExportError(f"encoder returned an empty vector for instance {rec.id!r}")
        elif vec.shape[0] != dim:
            raise ExportError(
                f"dim inconsistency: instance {rec.id!r} got {vec.shape[0]}, expected {dim}"
            )
        if not np.isfinite(vec).all():
            raise ExportError(f"encoder produced a non-finite value for instance {rec.id!r}")
        rows.append(vec)
    return np.vstack(rows) if rows else np.zeros((0, dim or 0))


def export_embeddings(dataset_path: str | Path, encoder: Callable, out_path: str | Path) -> int:
    """Write a kind-0 file of one vector per dataset instance; returns count."""
    records = read_records(dataset_path)
    rows = encode_records(records, encoder)
    norms = np.linalg.norm(rows, axis=1) if len(records) else np.array([])
    if (norms == 0.0).any():
        bad = records[int(np.argmax(norms == 0.0))].id
        raise ExportError(f"encoder produced a zero vector for instance {bad!r}")
    write_nrcm(out_path, KIND_EMBEDDINGS, [r.id for r in records], rows.astype(np.float32))
    return len(records)


def _renormalize(row: np.ndarray, rec_id: str) -> np.ndarray:
    total = float(row.sum())
    if total <= 0.0:
        raise ExportError(f"probability row for instance {rec_id!r} sums to {total}")
    out = (row / total).astype(np.float32)
    # float32 rounding can leave the sum a hair off 1; absorb the deficit
    # into the largest entry so rows land within 1e-6
    deficit = 1.0 - float(out.astype(np.float64).sum())
    if abs(deficit) > 1e-7:
        j = int(np.argmax(out))
        out[j] = np.float32(float(out[j]) + deficit)
    return out


def export_predictions(
    dataset_path: str | Path,
    classifier: Callable,
    labels_path: str | Path,
    out_path: str | Path,
) -> int:
    """Write a kind-1 file of per-label probability rows; returns count.

    Label strings are copied verbatim from the label-space file; rows are
    renormalized to sum 1 within 1e-6 before writing.
    """
    records = read_records(dataset_path)
    labels = read_labels(labels_path)
    rows = []
    for rec in records:
        row = np.asarray(classifier(rec, labels), dtype=np.float64).ravel()
        if row.shape[0] != len(labels):
            raise ExportError(
                f"label-order mismatch: classifier returned {row.shape[0]} probabilities "
                f"for {len(labels)} labels on instance {rec.id!r}"
            )
        if not np.isfinite(row).all():
            raise ExportError(f"classifier produced a non-finite value for instance {rec.id!r}")
        if (row < 0).any():
            raise ExportError(f"negative probability for instance {rec.id!r}")
        rows.append(_renormalize(row, rec.id))
    matrix = np.vstack(rows) if rows else np.zeros((0, len(labels)), dtype=np.float32)
    write_nrcm(out_path, KIND_PREDICTIONS, [r.id for r in records], matrix, labels)
    return len(records)
