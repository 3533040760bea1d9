"""Scoring under the TACRED convention, confusion matrices, top-k rescoring.

Micro precision/recall/F1 are computed over positive-class predictions
only: precision = correct-positive / predicted-positive, recall =
correct-positive / gold-positive. Positive accuracy equals recall by
definition; negative accuracy is the fraction of gold negatives predicted
negative.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import LabelSpace, NoiseAuditError
from .vecstore import PredictionSet


@dataclass(frozen=True)
class ScoreReport:
    precision: float
    recall: float
    f1: float
    pos_acc: float
    neg_acc: float
    overall_acc: float
    predicted_positive: int
    correct_positive: int
    gold_positive: int
    gold_negative: int
    correct_negative: int
    # True when predicted_positive == 0 and precision fell back to 1.0.
    precision_flagged: bool = False

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "pos_acc": self.pos_acc,
            "neg_acc": self.neg_acc,
            "overall_acc": self.overall_acc,
            "counts": {
                "predicted_positive": self.predicted_positive,
                "correct_positive": self.correct_positive,
                "gold_positive": self.gold_positive,
                "gold_negative": self.gold_negative,
                "correct_negative": self.correct_negative,
            },
            "precision_flagged": self.precision_flagged,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        rows = [
            ("precision", self.precision, "flagged: no positive predictions" if self.precision_flagged else ""),
            ("recall", self.recall, ""),
            ("f1", self.f1, ""),
            ("pos_acc", self.pos_acc, ""),
            ("neg_acc", self.neg_acc, ""),
            ("overall_acc", self.overall_acc, ""),
        ]
        lines = [f"{name:<12} {value:7.4f}  {note}".rstrip() for name, value, note in rows]
        lines.append(
            f"{'counts':<12} pred+={self.predicted_positive} correct+={self.correct_positive} "
            f"gold+={self.gold_positive} gold-={self.gold_negative} correct-={self.correct_negative}"
        )
        return "\n".join(lines)


def _check_sequences(gold: Sequence[str], pred: Sequence[str], ls: LabelSpace) -> None:
    if len(gold) != len(pred):
        raise NoiseAuditError(f"length mismatch: {len(gold)} gold vs {len(pred)} predictions")
    for seq, name in ((gold, "gold"), (pred, "predicted")):
        for label in seq:
            if label not in ls:
                raise NoiseAuditError(f"unknown {name} label: {label!r}")


def score(gold: Sequence[str], pred: Sequence[str], ls: LabelSpace) -> ScoreReport:
    """Micro-averaged scores over positive classes plus Pos/Neg accuracy.

    predicted_positive == 0 yields precision 1.0 with the flag set,
    instead of NaN.
    """
    _check_sequences(gold, pred, ls)
    neg = ls.negative_label
    pp = cp = gp = gn = cn = overall = 0
    for g, p in zip(gold, pred):
        if p != neg:
            pp += 1
        if g != neg:
            gp += 1
            if g == p:
                cp += 1
        else:
            gn += 1
            if p == neg:
                cn += 1
        if g == p:
            overall += 1
    flagged = pp == 0
    precision = 1.0 if flagged else cp / pp
    recall = cp / gp if gp else 0.0
    f1 = 2 * cp / (pp + gp) if pp + gp else 0.0
    n = len(gold)
    return ScoreReport(
        precision=precision,
        recall=recall,
        f1=f1,
        pos_acc=recall,
        neg_acc=cn / gn if gn else 0.0,
        overall_acc=overall / n if n else 0.0,
        predicted_positive=pp,
        correct_positive=cp,
        gold_positive=gp,
        gold_negative=gn,
        correct_negative=cn,
        precision_flagged=flagged,
    )


@dataclass(frozen=True)
class ConfusionMatrix:
    """Gold x predicted counts with a row-normalized percentage view."""

    labels: tuple[str, ...]
    counts: np.ndarray
    percent: np.ndarray
    zero_gold_labels: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "counts": self.counts.tolist(),
            "percent": self.percent.tolist(),
            "zero_gold_labels": list(self.zero_gold_labels),
        }

    def to_csv(self, percent: bool = False) -> str:
        mat = self.percent if percent else self.counts
        header = "gold\\pred," + ",".join(self.labels)
        lines = [header]
        for label, row in zip(self.labels, mat):
            cells = [f"{v:.4f}" if percent else str(int(v)) for v in row]
            lines.append(label + "," + ",".join(cells))
        return "\n".join(lines) + "\n"


def confusion(gold: Sequence[str], pred: Sequence[str], ls: LabelSpace) -> ConfusionMatrix:
    """counts[g][p] = instances with gold label g predicted as p.

    Percentages are row-normalized; rows with zero gold count stay
    all-zero and their labels are flagged.
    """
    _check_sequences(gold, pred, ls)
    n_labels = len(ls.labels)
    counts = np.zeros((n_labels, n_labels), dtype=np.int64)
    for g, p in zip(gold, pred):
        counts[ls.index(g), ls.index(p)] += 1
    row_sums = counts.sum(axis=1)
    percent = np.zeros((n_labels, n_labels), dtype=np.float64)
    nonzero = row_sums > 0
    percent[nonzero] = counts[nonzero] * 100.0 / row_sums[nonzero, None]
    flagged = tuple(ls.labels[i] for i in range(n_labels) if not nonzero[i])
    return ConfusionMatrix(ls.labels, counts, percent, flagged)


@dataclass(frozen=True)
class TopKReport:
    """Scores after counting gold-in-top-K as correct, with rank buckets."""

    k: int
    report: ScoreReport
    # Percentage of instances whose gold label was found at each rank
    # (1..K), plus the share never found ("wrong").
    buckets: dict[str, float]
    bucket_counts: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "report": self.report.to_dict(),
            "buckets": dict(self.buckets),
            "bucket_counts": dict(self.bucket_counts),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        buckets = "  ".join(f"{name}={pct:.1f}%" for name, pct in self.buckets.items())
        return f"top-{self.k} rescoring\n{self.report.to_text()}\n{'buckets':<12} {buckets}"


def topk_rescore(preds: PredictionSet, gold: Sequence[str], k: int, ls: LabelSpace) -> TopKReport:
    """Rescore counting an instance correct when gold ranks in the top k.

    Ranks order probabilities descending with ties broken by label index.
    When gold is outside the top k, the rank-1 label stands in as the
    prediction and the instance lands in the "wrong" bucket.
    """
    if preds.label_order != ls.labels:
        raise NoiseAuditError("prediction label order does not match the label space")
    if not 1 <= k <= len(ls.labels):
        raise NoiseAuditError(f"k must be in [1, {len(ls.labels)}], got {k}")
    if len(gold) != len(preds):
        raise NoiseAuditError(
            f"prediction rows ({len(preds)}) misaligned with gold labels ({len(gold)})"
        )
    for label in gold:
        if label not in ls:
            raise NoiseAuditError(f"unknown gold label: {label!r}")

    effective: list[str] = []
    rank_counts = {r: 0 for r in range(1, k + 1)}
    wrong = 0
    for row, g in zip(preds.rows, gold):
        order = np.argsort(-row, kind="stable")
        gold_idx = ls.index(g)
        rank = int(np.nonzero(order == gold_idx)[0][0]) + 1
        if rank <= k:
            effective.append(g)
            rank_counts[rank] += 1
        else:
            effective.append(ls.labels[order[0]])
            wrong += 1

    n = len(gold)
    bucket_counts = {f"top{r}": rank_counts[r] for r in range(1, k + 1)}
    bucket_counts["wrong"] = wrong
    buckets = {name: (c * 100.0 / n if n else 0.0) for name, c in bucket_counts.items()}
    return TopKReport(k, score(gold, effective, ls), buckets, bucket_counts)
