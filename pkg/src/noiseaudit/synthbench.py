"""Synthetic cluster benchmark with ground-truth noise injection.

Positive classes are Gaussian clusters around unit anchor directions
taken from the signed standard basis (+e_i, -e_i), which guarantees a
pairwise anchor distance of sqrt(2) and caps the layout at 2*dim
anchors. The within-class standard deviation sigma is the RMS radius
sqrt(E||x - mu||^2) of a cluster; it is set to sqrt(2)/class_separation
so anchors sit at exactly class_separation * sigma from each other.
Negatives are drawn around leftover anchors, all at >= class_separation
* sigma from every class mean. Everything is deterministic in the seed.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import Dataset, Instance, LabelSpace, NoiseAuditError, NoiseManifest
from .detect import CleanSubset, extrinsic_eliminate, extrinsic_relabel, negatives_only
from .metrics import score
from .transforms import apply_elimination
from .vecstore import EmbeddingSet

NEGATIVE_LABEL = "no_relation"
# Target at least this many negatives per anchor when splitting them up.
_MIN_NEGATIVES_PER_ANCHOR = 8


@dataclass(frozen=True)
class SynthSpec:
    n_positive_classes: int
    per_class: int
    n_negatives: int
    dim: int
    class_separation: float
    seed: int

    def __post_init__(self):
        if self.n_positive_classes < 0 or self.per_class < 0 or self.n_negatives < 0:
            raise NoiseAuditError("synthetic counts must be >= 0")
        if self.dim < 2:
            raise NoiseAuditError(f"dim must be >= 2, got {self.dim}")
        if not self.class_separation > 0:
            raise NoiseAuditError(f"class separation must be > 0, got {self.class_separation}")


@dataclass(frozen=True)
class InjectionLedger:
    """Ground truth for injected noise: flipped id -> original label."""

    originals: dict[str, str]
    noise_rate: float

    def __len__(self) -> int:
        return len(self.originals)

    def to_dict(self) -> dict:
        return {"originals": dict(self.originals), "noise_rate": self.noise_rate}


def _anchor_directions(dim: int) -> np.ndarray:
    eye = np.eye(dim)
    return np.vstack([eye, -eye])


def generate(spec: SynthSpec, id_prefix: str = "syn") -> tuple[Dataset, EmbeddingSet]:
    """Build a labeled dataset plus embeddings from a SynthSpec geometry."""
    capacity = 2 * spec.dim
    if spec.n_positive_classes > capacity:
        raise NoiseAuditError(
            f"cannot place {spec.n_positive_classes} class means: the signed-basis "
            f"layout packs at most 2*dim = {capacity} anchors at pairwise distance sqrt(2)"
        )
    n_anchors = 0
    if spec.n_negatives > 0:
        remaining = capacity - spec.n_positive_classes
        if remaining < 1:
            raise NoiseAuditError(
                f"no anchor left for negatives: {spec.n_positive_classes} classes "
                f"exhaust the packing bound 2*dim = {capacity}"
            )
        n_anchors = min(remaining, max(1, spec.n_negatives // _MIN_NEGATIVES_PER_ANCHOR))

    anchors = _anchor_directions(spec.dim)
    # sigma is the RMS cluster radius; per-coordinate scale follows from
    # E||g||^2 = dim for standard normal g.
    sigma = math.sqrt(2.0) / spec.class_separation
    per_coord = sigma / math.sqrt(spec.dim)
    rng = np.random.default_rng(spec.seed)

    labels = tuple(f"rel_{c:02d}" for c in range(spec.n_positive_classes))
    ls = LabelSpace(labels + (NEGATIVE_LABEL,), NEGATIVE_LABEL)

    rows: list[np.ndarray] = []
    relations: list[str] = []
    for c in range(spec.n_positive_classes):
        pts = anchors[c] + per_coord * rng.standard_normal((spec.per_class, spec.dim))
        rows.append(pts)
        relations.extend([labels[c]] * spec.per_class)
    if spec.n_negatives > 0:
        base = spec.n_negatives // n_anchors
        extras = spec.n_negatives % n_anchors
        for j in range(n_anchors):
            count = base + (1 if j < extras else 0)
            anchor = anchors[spec.n_positive_classes + j]
            pts = anchor + per_coord * rng.standard_normal((count, spec.dim))
            rows.append(pts)
            relations.extend([NEGATIVE_LABEL] * count)

    total = len(relations)
    matrix = np.vstack(rows) if rows else np.zeros((0, spec.dim))
    ids = tuple(f"{id_prefix}-{spec.seed}-{i:06d}" for i in range(total))
    instances = tuple(
        Instance(
            id=iid,
            tokens=("alpha", "relates", "beta"),
            subj_span=(0, 0),
            obj_span=(2, 2),
            subj_type="SYNTH",
            obj_type="SYNTH",
            relation=rel,
            split="train",
        )
        for iid, rel in zip(ids, relations)
    )
    return Dataset(ls, instances), EmbeddingSet(ids, matrix.astype(np.float32))


def split_holdout(
    dataset: Dataset,
    embeddings: EmbeddingSet,
    every: int = 3,
) -> tuple[Dataset, EmbeddingSet, CleanSubset]:
    """Peel off every `every`-th instance as an untouched clean subset.

    Generation orders instances class by class, so the stride keeps each
    cluster represented on both sides. Returns (audited dataset, audited
    embeddings, clean subset).
    """
    if every < 2:
        raise NoiseAuditError(f"holdout stride must be >= 2, got {every}")
    clean_ids = [inst.id for i, inst in enumerate(dataset.instances) if i % every == 0]
    audit_ids = [inst.id for i, inst in enumerate(dataset.instances) if i % every != 0]
    if not clean_ids or not audit_ids:
        raise NoiseAuditError("holdout split left one side empty")
    clean = CleanSubset(dataset.restrict(clean_ids), embeddings.select(clean_ids))
    return dataset.restrict(audit_ids), embeddings.select(audit_ids), clean


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def inject_false_negatives(
    dataset: Dataset,
    rate: float,
    seed: int,
) -> tuple[Dataset, InjectionLedger]:
    """Flip round(rate * n_positive) positives to the negative label.

    Selection is seeded-uniform among positives; embeddings are untouched
    and the ledger records the original labels.
    """
    if not 0.0 <= rate <= 1.0:
        raise NoiseAuditError(f"noise rate must be in [0, 1], got {rate}")
    neg = dataset.label_space.negative_label
    positives = [i for i, inst in enumerate(dataset.instances) if inst.relation != neg]
    n_flip = _round_half_up(rate * len(positives))
    rng = np.random.default_rng(seed)
    chosen = sorted(rng.choice(len(positives), size=n_flip, replace=False).tolist())
    flip_positions = {positives[j] for j in chosen}

    originals: dict[str, str] = {}
    instances = []
    for i, inst in enumerate(dataset.instances):
        if i in flip_positions:
            originals[inst.id] = inst.relation
            instances.append(Instance(
                id=inst.id,
                tokens=inst.tokens,
                subj_span=inst.subj_span,
                obj_span=inst.obj_span,
                subj_type=inst.subj_type,
                obj_type=inst.obj_type,
                relation=neg,
                split=inst.split,
                extra=inst.extra,
            ))
        else:
            instances.append(inst)
    return Dataset(dataset.label_space, tuple(instances)), InjectionLedger(originals, rate)


@dataclass(frozen=True)
class DetectionReport:
    n_detected: int
    n_injected: int
    n_hit: int
    precision: float
    recall: float
    label_accuracy: float | None
    precision_defined: bool
    recall_defined: bool

    def to_dict(self) -> dict:
        return {
            "n_detected": self.n_detected,
            "n_injected": self.n_injected,
            "n_hit": self.n_hit,
            "precision": self.precision,
            "recall": self.recall,
            "label_accuracy": self.label_accuracy,
            "precision_defined": self.precision_defined,
            "recall_defined": self.recall_defined,
        }


def evaluate_detection(ledger: InjectionLedger, manifest: NoiseManifest) -> DetectionReport:
    """Detection precision/recall against the injection ledger.

    For manifests carrying a relabel map, label accuracy is the fraction
    of detected-and-injected ids whose relabel value equals the ledger's
    original label.
    """
    detected = manifest.detected_ids
    injected = set(ledger.originals)
    hits = [iid for iid in detected if iid in injected]
    precision_defined = len(detected) > 0
    recall_defined = len(injected) > 0
    label_accuracy = None
    if manifest.relabel:
        relabeled_hits = [iid for iid in hits if iid in manifest.relabel]
        if relabeled_hits:
            good = sum(1 for iid in relabeled_hits if manifest.relabel[iid] == ledger.originals[iid])
            label_accuracy = good / len(relabeled_hits)
    return DetectionReport(
        n_detected=len(detected),
        n_injected=len(injected),
        n_hit=len(hits),
        precision=len(hits) / len(detected) if precision_defined else 0.0,
        recall=len(hits) / len(injected) if recall_defined else 0.0,
        label_accuracy=label_accuracy,
        precision_defined=precision_defined,
        recall_defined=recall_defined,
    )


def nearest_centroid_labels(
    train: Dataset,
    train_embeddings: EmbeddingSet,
    query_embeddings: EmbeddingSet,
) -> list[str]:
    """Classify queries by cosine to per-label centroids (ties: label index)."""
    ls = train.label_space
    rows = train_embeddings.gather([inst.id for inst in train.instances]).astype(np.float64)
    centroids = []
    present = []
    for label in ls.labels:
        idx = [i for i, inst in enumerate(train.instances) if inst.relation == label]
        if not idx:
            continue
        c = rows[idx].mean(axis=0)
        norm = np.sqrt((c * c).sum())
        if norm == 0.0:
            continue
        centroids.append(c / norm)
        present.append(label)
    if not centroids:
        raise NoiseAuditError("no trainable centroids: training set is empty")
    cmat = np.vstack(centroids)
    q = query_embeddings.rows.astype(np.float64)
    qn = np.sqrt((q * q).sum(axis=1))
    sims = (q @ cmat.T) / qn[:, None]
    return [present[int(i)] for i in np.argmax(sims, axis=1)]


def run_cell(
    n_classes: int,
    per_class: int,
    n_negatives: int,
    dim: int,
    separation: float,
    rate: float,
    k: int,
    seed: int,
    holdout_every: int = 3,
    threads: int | None = None,
) -> dict:
    """One sweep cell: generate, hold out, inject, detect, measure.

    Detection runs both extrinsic algorithms against the clean holdout;
    downstream deltas compare a nearest-centroid classifier trained on
    the noisy vs. elimination-cleaned audited set, evaluated on the
    holdout gold labels.
    """
    spec = SynthSpec(n_classes, per_class, n_negatives, dim, separation, seed)
    full_ds, full_emb = generate(spec)
    audited, audited_emb, clean = split_holdout(full_ds, full_emb, holdout_every)
    noisy, ledger = inject_false_negatives(audited, rate, seed)

    scope = negatives_only(noisy.label_space)
    m_elim = extrinsic_eliminate(noisy, audited_emb, clean, k, scope, "neg", threads=threads)
    m_rel = extrinsic_relabel(noisy, audited_emb, clean, k, scope, "strict", "neg", threads=threads)
    elim_report = evaluate_detection(ledger, m_elim)
    rel_report = evaluate_detection(ledger, m_rel)

    holdout_gold = [inst.relation for inst in clean.dataset.instances]
    pred_noisy = nearest_centroid_labels(noisy, audited_emb, clean.embeddings)
    cleaned, _ = apply_elimination(noisy, m_elim)
    pred_cleaned = nearest_centroid_labels(cleaned, audited_emb, clean.embeddings)
    f1_noisy = score(holdout_gold, pred_noisy, noisy.label_space).f1
    f1_cleaned = score(holdout_gold, pred_cleaned, noisy.label_space).f1

    return {
        "separation": separation,
        "rate": rate,
        "k": k,
        "seed": seed,
        "n_audited": len(noisy),
        "n_injected": elim_report.n_injected,
        "eliminate_detected": elim_report.n_detected,
        "eliminate_precision": elim_report.precision,
        "eliminate_recall": elim_report.recall,
        "relabel_detected": rel_report.n_detected,
        "relabel_precision": rel_report.precision,
        "relabel_recall": rel_report.recall,
        "relabel_label_accuracy": rel_report.label_accuracy,
        "f1_noisy": f1_noisy,
        "f1_cleaned": f1_cleaned,
        "f1_delta": f1_cleaned - f1_noisy,
    }


SWEEP_COLUMNS = (
    "separation", "rate", "k", "seed", "n_audited", "n_injected",
    "eliminate_detected", "eliminate_precision", "eliminate_recall",
    "relabel_detected", "relabel_precision", "relabel_recall",
    "relabel_label_accuracy", "f1_noisy", "f1_cleaned", "f1_delta",
)


def run_sweep(config: dict, threads: int | None = None) -> list[dict]:
    """Grid over separations x rates x ks x seeds from a sweep config."""
    required = ("classes", "per_class", "negatives", "dim", "separations", "rates", "ks", "seeds")
    missing = [key for key in required if key not in config]
    if missing:
        raise NoiseAuditError(f"sweep config missing keys: {missing}")
    holdout = config.get("holdout_every", 3)
    rows = []
    for sep, rate, k, seed in itertools.product(
        config["separations"], config["rates"], config["ks"], config["seeds"]
    ):
        rows.append(run_cell(
            config["classes"], config["per_class"], config["negatives"], config["dim"],
            sep, rate, k, seed, holdout_every=holdout, threads=threads,
        ))
    return rows


def sweep_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        out = dict(row)
        if out.get("relabel_label_accuracy") is None:
            out["relabel_label_accuracy"] = ""
        writer.writerow(out)
    return buf.getvalue()
