"""Small builders shared across test modules."""

from __future__ import annotations

import numpy as np

from noiseaudit.core import Dataset, Instance, LabelSpace
from noiseaudit.detect import CleanSubset
from noiseaudit.vecstore import EmbeddingSet

NEG = "N"


def label_space(*positives: str, negative: str = NEG) -> LabelSpace:
    return LabelSpace(tuple(positives) + (negative,), negative)


def instance(iid: str, relation: str, split: str = "train", tokens=("a", "b", "c")) -> Instance:
    return Instance(
        id=iid,
        tokens=tokens,
        subj_span=(0, 0),
        obj_span=(len(tokens) - 1, len(tokens) - 1),
        subj_type="T",
        obj_type="T",
        relation=relation,
        split=split,
    )


def dataset(ls: LabelSpace, *rows) -> Dataset:
    """rows: (id, relation) or (id, relation, split) tuples."""
    return Dataset(ls, tuple(instance(*row) for row in rows))


def embeddings(pairs) -> EmbeddingSet:
    """pairs: iterable of (id, vector)."""
    pairs = list(pairs)
    ids = tuple(iid for iid, _ in pairs)
    rows = np.array([vec for _, vec in pairs], dtype=np.float32)
    return EmbeddingSet(ids, rows)


def random_micro_setting(rng: np.random.Generator, max_points: int = 50):
    """A random audited dataset + embeddings + clean subset for detector tests."""
    n_pos_labels = int(rng.integers(2, 5))
    ls = label_space(*(f"L{i}" for i in range(n_pos_labels)))
    dim = int(rng.integers(2, 8))
    k = int(rng.integers(1, 6))

    n_audit = int(rng.integers(2, max_points + 1))
    audit_labels = [str(rng.choice(ls.labels)) for _ in range(n_audit)]
    audited = dataset(ls, *((f"a{i}", lab) for i, lab in enumerate(audit_labels)))
    audited_emb = embeddings(
        (f"a{i}", rng.normal(size=dim)) for i in range(n_audit)
    )

    n_clean = int(rng.integers(1, max_points + 1))
    clean_labels = [str(rng.choice(ls.labels)) for _ in range(n_clean)]
    clean_ds = dataset(ls, *((f"c{i}", lab) for i, lab in enumerate(clean_labels)))
    clean_emb = embeddings((f"c{i}", rng.normal(size=dim)) for i in range(n_clean))
    return ls, audited, audited_emb, CleanSubset(clean_ds, clean_emb), k
