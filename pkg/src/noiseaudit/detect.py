"""Nearest-neighbor noise identification: the intrinsic and extrinsic strategies.

The intrinsic strategy treats a model's false-negative predictions as
seeds and marks their nearest negative-labeled neighbors as noisy. The
extrinsic strategy audits instances against a trusted clean subset: an
instance whose k nearest clean neighbors never share its label is marked
for elimination; one whose neighbors unanimously carry a single different
label is marked for reannotation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .core import Dataset, LabelSpace, NoiseAuditError, NoiseManifest, relabeled
from .vecstore import EmbeddingSet, knn_many

RELABEL_MODES = ("strict", "pseudocode")


@dataclass(frozen=True)
class SeedSet:
    """False-negative predictions: (instance id, gold positive label) pairs."""

    entries: tuple[tuple[str, str], ...]

    def __len__(self) -> int:
        return len(self.entries)

    def to_dict(self) -> dict:
        return {"seeds": [{"id": iid, "label": label} for iid, label in self.entries]}


@dataclass(frozen=True)
class CleanSubset:
    """Trusted instances plus their aligned embeddings, used as kNN anchors."""

    dataset: Dataset
    embeddings: EmbeddingSet

    def __post_init__(self):
        ds_ids = set(inst.id for inst in self.dataset.instances)
        emb_ids = set(self.embeddings.ids)
        if ds_ids != emb_ids:
            stray = sorted(ds_ids.symmetric_difference(emb_ids))[0]
            raise NoiseAuditError(f"clean subset dataset/embedding ids differ (e.g. {stray!r})")

    def __len__(self) -> int:
        return len(self.dataset)


@dataclass(frozen=True)
class MappingReport:
    kept: int
    dropped: int
    kept_positive: int
    kept_negative: int
    positive_relations: int

    def to_dict(self) -> dict:
        return {
            "kept": self.kept,
            "dropped": self.dropped,
            "kept_positive": self.kept_positive,
            "kept_negative": self.kept_negative,
            "positive_relations": self.positive_relations,
        }


def extract_seeds(
    gold: Sequence[str],
    pred: Sequence[str],
    ids: Sequence[str],
    ls: LabelSpace,
) -> SeedSet:
    """Instances with a positive gold label predicted negative, in input order."""
    if not (len(gold) == len(pred) == len(ids)):
        raise NoiseAuditError(
            f"alignment mismatch: {len(gold)} gold, {len(pred)} predictions, {len(ids)} ids"
        )
    neg = ls.negative_label
    entries = []
    for iid, g, p in zip(ids, gold, pred):
        if g not in ls:
            raise NoiseAuditError(f"unknown gold label: {g!r}")
        if p not in ls:
            raise NoiseAuditError(f"unknown predicted label: {p!r}")
        if g != neg and p == neg:
            entries.append((iid, g))
    return SeedSet(tuple(entries))


def intrinsic_detect(
    seeds: SeedSet,
    pool: EmbeddingSet,
    seed_embeddings: EmbeddingSet,
    k: int,
    pool_note: str = "",
    seed_source: str = "false-negative predictions",
    threads: int | None = None,
) -> NoiseManifest:
    """Mark the k nearest pool neighbors of every seed for elimination.

    Every discovered id is also entered in the relabel map with the gold
    label of the most similar seed seen so far; insertion order follows
    first discovery. The pool must contain only negative-labeled ids.
    """
    if k < 1:
        raise NoiseAuditError(f"k must be >= 1, got {k}")
    provenance = {
        "strategy": "IS",
        "k": k,
        "seed_source": seed_source,
        "pool": pool_note,
        "seed_count": len(seeds),
    }
    if not seeds.entries:
        return NoiseManifest((), {}, provenance)
    if len(pool) == 0:
        raise NoiseAuditError("intrinsic detection needs a non-empty negative pool")
    queries = seed_embeddings.gather([sid for sid, _ in seeds.entries])
    neighbor_lists = knn_many(queries, pool, k, threads=threads)

    eliminate: list[str] = []
    relabel: dict[str, str] = {}
    best_sim: dict[str, float] = {}
    for (sid, label), neighbors in zip(seeds.entries, neighbor_lists):
        for nid, sim in neighbors:
            if nid not in best_sim:
                eliminate.append(nid)
                relabel[nid] = label
                best_sim[nid] = sim
            elif sim > best_sim[nid]:
                relabel[nid] = label
                best_sim[nid] = sim
    return NoiseManifest(tuple(eliminate), relabel, provenance)


def negatives_only(ls: LabelSpace) -> Callable[[str], bool]:
    neg = ls.negative_label
    return lambda label: label == neg


def all_labels(_: LabelSpace) -> Callable[[str], bool]:
    return lambda label: True


def make_scope(name: str, ls: LabelSpace) -> Callable[[str], bool]:
    if name in ("neg", "negatives"):
        return negatives_only(ls)
    if name == "all":
        return all_labels(ls)
    raise NoiseAuditError(f"unknown scope {name!r}; expected 'neg' or 'all'")


def _audit_queries(
    audited: Dataset,
    embeddings: EmbeddingSet,
    clean: CleanSubset,
    k: int,
    scope: Callable[[str], bool],
    threads: int | None,
):
    if k < 1:
        raise NoiseAuditError(f"k must be >= 1, got {k}")
    if len(clean) == 0:
        raise NoiseAuditError("extrinsic detection needs a non-empty clean subset")
    overlap = set(audited.ids) & set(clean.embeddings.ids)
    if overlap:
        raise NoiseAuditError(
            f"clean subset overlaps the audited dataset (e.g. {sorted(overlap)[0]!r})"
        )
    examined = [inst for inst in audited.instances if scope(inst.relation)]
    if not examined:
        return [], []
    queries = embeddings.gather([inst.id for inst in examined])
    neighbor_lists = knn_many(queries, clean.embeddings, k, threads=threads)
    clean_label = {inst.id: inst.relation for inst in clean.dataset.instances}
    labeled = [[clean_label[nid] for nid, _ in nl] for nl in neighbor_lists]
    return examined, labeled


def _per_split(audited: Dataset, detected) -> dict[str, int]:
    counts = {"train": 0, "dev": 0, "test": 0}
    for iid in detected:
        counts[audited.get(iid).split] += 1
    return counts


def extrinsic_eliminate(
    audited: Dataset,
    embeddings: EmbeddingSet,
    clean: CleanSubset,
    k: int,
    scope: Callable[[str], bool],
    scope_note: str = "",
    threads: int | None = None,
) -> NoiseManifest:
    """Eliminate instances none of whose k nearest clean neighbors share
    their label."""
    examined, neighbor_labels = _audit_queries(audited, embeddings, clean, k, scope, threads)
    eliminate = [
        inst.id
        for inst, labels in zip(examined, neighbor_labels)
        if sum(1 for l in labels if l == inst.relation) == 0
    ]
    provenance = {
        "strategy": "ES-eliminate",
        "k": k,
        "scope": scope_note,
        "clean_size": len(clean),
        "examined": len(examined),
        "per_split_detected": _per_split(audited, eliminate),
    }
    return NoiseManifest(tuple(eliminate), {}, provenance)


def extrinsic_relabel(
    audited: Dataset,
    embeddings: EmbeddingSet,
    clean: CleanSubset,
    k: int,
    scope: Callable[[str], bool],
    mode: str = "strict",
    scope_note: str = "",
    threads: int | None = None,
) -> NoiseManifest:
    """Relabel instances whose clean neighborhood is unanimous for another label.

    strict mode: all k neighbor labels must equal one label l != the
    instance's label. pseudocode mode: neighbors matching the instance's
    label are dropped first; the remainder must be non-empty and
    unanimous. Strict detections are a subset of pseudocode detections.
    """
    if mode not in RELABEL_MODES:
        raise NoiseAuditError(f"unknown relabel mode {mode!r}; expected one of {RELABEL_MODES}")
    examined, neighbor_labels = _audit_queries(audited, embeddings, clean, k, scope, threads)
    relabel: dict[str, str] = {}
    for inst, labels in zip(examined, neighbor_labels):
        if mode == "strict":
            if labels and labels[0] != inst.relation and all(l == labels[0] for l in labels):
                relabel[inst.id] = labels[0]
        else:
            rest = [l for l in labels if l != inst.relation]
            if rest and all(l == rest[0] for l in rest):
                relabel[inst.id] = rest[0]
    provenance = {
        "strategy": "ES-relabel",
        "k": k,
        "mode": mode,
        "scope": scope_note,
        "clean_size": len(clean),
        "examined": len(examined),
        "per_split_detected": _per_split(audited, relabel),
    }
    return NoiseManifest((), relabel, provenance)


def map_clean_subset(
    external: Dataset,
    external_embeddings: EmbeddingSet,
    mapping: Mapping[str, str],
    ls: LabelSpace,
) -> tuple[CleanSubset, MappingReport]:
    """Restrict an external dataset to mappable relations, rewriting labels.

    Instances whose relation has no mapping are dropped and counted;
    mapping targets must belong to the audited label space.
    """
    bad_targets = sorted(set(mapping.values()) - set(ls.labels))
    if bad_targets:
        raise NoiseAuditError(f"mapping target {bad_targets[0]!r} is not in the label space")
    kept: list = []
    dropped = 0
    for inst in external.instances:
        target = mapping.get(inst.relation)
        if target is None:
            dropped += 1
            continue
        kept.append(relabeled(inst, target))
    subset_ds = Dataset(ls, tuple(kept))
    subset_emb = external_embeddings.select([inst.id for inst in kept]) if kept else EmbeddingSet(
        (), external_embeddings.rows[:0]
    )
    neg = ls.negative_label
    kept_neg = sum(1 for inst in kept if inst.relation == neg)
    positive_relations = len({inst.relation for inst in kept if inst.relation != neg})
    report = MappingReport(
        kept=len(kept),
        dropped=dropped,
        kept_positive=len(kept) - kept_neg,
        kept_negative=kept_neg,
        positive_relations=positive_relations,
    )
    return CleanSubset(subset_ds, subset_emb), report


def intrinsic_pipeline(
    dataset: Dataset,
    embeddings: EmbeddingSet,
    gold: Sequence[str],
    pred: Sequence[str],
    k: int,
    pool: str = "train",
    threads: int | None = None,
) -> NoiseManifest:
    """Wire the intrinsic strategy's two pool presets over a loaded dataset.

    pool="train": seeds and negative pool both come from the train split.
    pool="own-split": each split is audited against its own negatives,
    and the per-split manifests are merged (pools are disjoint, so no
    conflicts arise).
    """
    if pool not in ("train", "own-split"):
        raise NoiseAuditError(f"unknown pool preset {pool!r}; expected 'train' or 'own-split'")
    if not (len(gold) == len(pred) == len(dataset)):
        raise NoiseAuditError("gold/pred sequences misaligned with the dataset")
    ls = dataset.label_space
    splits = ("train",) if pool == "train" else ("train", "dev", "test")

    eliminate: list[str] = []
    relabel: dict[str, str] = {}
    per_split: dict[str, int] = {}
    for split in splits:
        rows = [
            (inst.id, g, p)
            for inst, g, p in zip(dataset.instances, gold, pred)
            if inst.split == split
        ]
        if not rows:
            continue
        seeds = extract_seeds([g for _, g, _ in rows], [p for _, _, p in rows], [i for i, _, _ in rows], ls)
        if not seeds.entries:
            per_split[split] = 0
            continue
        neg_ids = [iid for iid, g, _ in rows if g == ls.negative_label]
        if not neg_ids:
            raise NoiseAuditError(f"split {split!r} has no negative instances to pool")
        part = intrinsic_detect(
            seeds,
            embeddings.select(neg_ids),
            embeddings,
            k,
            pool_note=f"{split}-negatives",
            threads=threads,
        )
        eliminate.extend(part.eliminate)
        relabel.update(part.relabel)
        per_split[split] = len(part.eliminate)
    provenance = {
        "strategy": "IS",
        "k": k,
        "seed_source": "false-negative predictions",
        "pool": pool,
        "per_split_detected": per_split,
    }
    return NoiseManifest(tuple(eliminate), relabel, provenance)
