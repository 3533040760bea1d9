"""Dataset variant construction: downsampling, binary collapse, manifest edits.

All operations are pure dataset-to-dataset functions; source files are
never mutated. Downsampling keeps exact per-split counts (round-half-up)
rather than sampling per instance, and refuses to touch the test split.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    Dataset,
    LabelSpace,
    NoiseAuditError,
    NoiseManifest,
    SPLITS,
    relabeled,
)

log = logging.getLogger(__name__)

BINARY_POSITIVE_LABEL = "relation"


def _round_half_up_ratio(n: int, a: int, b: int) -> int:
    # round(n * a / b) with halves up, in exact integer arithmetic
    return (2 * n * a + b) // (2 * b)


def downsample_negatives(
    dataset: Dataset,
    ratio: tuple[int, int],
    splits: Sequence[str] = ("train", "dev"),
    seed: int = 0,
) -> Dataset:
    """Keep exactly round(n_neg * a/b) negatives per selected split.

    Selection is uniform without replacement under the seeded generator;
    positives and unselected splits are untouched and instance order is
    preserved. The test split is refused.
    """
    a, b = ratio
    if not (isinstance(a, int) and isinstance(b, int)) or not (0 <= a <= b) or b < 1:
        raise NoiseAuditError(f"invalid ratio {a}:{b}; need integers 0 <= a <= b, b >= 1")
    chosen_splits = tuple(splits)
    for s in chosen_splits:
        if s == "test":
            raise NoiseAuditError("refusing to downsample the test split")
        if s not in SPLITS:
            raise NoiseAuditError(f"unknown split {s!r}")

    rng = np.random.default_rng(seed)
    neg = dataset.label_space.negative_label
    drop: set[int] = set()
    # Fixed split processing order keeps the generator stream reproducible.
    for s in ("train", "dev"):
        if s not in chosen_splits:
            continue
        neg_positions = [
            i for i, inst in enumerate(dataset.instances)
            if inst.split == s and inst.relation == neg
        ]
        keep_n = _round_half_up_ratio(len(neg_positions), a, b)
        kept = set(rng.choice(len(neg_positions), size=keep_n, replace=False).tolist())
        drop.update(p for j, p in enumerate(neg_positions) if j not in kept)
    instances = tuple(inst for i, inst in enumerate(dataset.instances) if i not in drop)
    return Dataset(dataset.label_space, instances)


def binary_collapse(dataset: Dataset) -> Dataset:
    """Group every positive relation under a single "relation" label."""
    neg = dataset.label_space.negative_label
    if neg == BINARY_POSITIVE_LABEL:
        raise NoiseAuditError(
            f"cannot collapse: negative label is already {BINARY_POSITIVE_LABEL!r}"
        )
    ls = LabelSpace((BINARY_POSITIVE_LABEL, neg), neg)
    instances = tuple(
        inst if inst.relation == neg else relabeled(inst, BINARY_POSITIVE_LABEL)
        for inst in dataset.instances
    )
    return Dataset(ls, instances)


def apply_elimination(dataset: Dataset, manifest: NoiseManifest) -> tuple[Dataset, dict[str, int]]:
    """Remove the manifest's eliminate ids; returns per-split removal counts."""
    removed = {s: 0 for s in SPLITS}
    targets = set(manifest.eliminate)
    for iid in manifest.eliminate:
        removed[dataset.get(iid).split] += 1
    instances = tuple(inst for inst in dataset.instances if inst.id not in targets)
    return Dataset(dataset.label_space, instances), removed


@dataclass(frozen=True)
class ReannotationReport:
    changed: dict[str, int]
    noop_ids: tuple[str, ...]

    def to_dict(self) -> dict:
        return {"changed": dict(self.changed), "noop_ids": list(self.noop_ids)}


def apply_reannotation(dataset: Dataset, manifest: NoiseManifest) -> tuple[Dataset, ReannotationReport]:
    """Rewrite relations per the manifest's relabel map.

    Instance count and every other field are unchanged. A relabel equal
    to the current label is applied as a warned no-op and counted.
    """
    ls = dataset.label_space
    changed = {s: 0 for s in SPLITS}
    noops: list[str] = []
    for iid, label in manifest.relabel.items():
        inst = dataset.get(iid)
        if label not in ls:
            raise NoiseAuditError(f"relabel value {label!r} for {iid!r} is not in the label space")
        if label == inst.relation:
            noops.append(iid)
    if noops:
        log.warning("%d relabel entries match the current label; applied as no-ops", len(noops))
    noop_set = set(noops)
    instances = []
    for inst in dataset.instances:
        target = manifest.relabel.get(inst.id)
        if target is None or inst.id in noop_set:
            instances.append(inst)
        else:
            instances.append(relabeled(inst, target))
            changed[inst.split] += 1
    return Dataset(ls, tuple(instances)), ReannotationReport(changed, tuple(noops))
