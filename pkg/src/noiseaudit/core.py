"""Domain types, dataset/manifest I/O, and label-space management.

Datasets are JSON Lines files using the public TACRED field names (id,
token, subj_start, subj_end, obj_start, obj_end, subj_type, obj_type,
relation). The split of a record is given by which file it came from;
span end indices are inclusive, as in the source schema. Unknown relation
labels are hard errors: an auditing tool must never drop data silently.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple

SPLITS = ("train", "dev", "test")
DEFAULT_NEGATIVE_LABEL = "no_relation"
MANIFEST_STRATEGIES = ("IS", "ES-eliminate", "ES-relabel")

# Canonical record field order for JSONL serialization.
_RECORD_FIELDS = (
    "id",
    "token",
    "subj_start",
    "subj_end",
    "obj_start",
    "obj_end",
    "subj_type",
    "obj_type",
    "relation",
)


class NoiseAuditError(Exception):
    """Invalid input data or a violated contract (CLI exit code 3)."""


def _require_int(value, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise NoiseAuditError(f"{what} must be an integer, got {value!r}")
    return value


@dataclass(frozen=True)
class LabelSpace:
    """Ordered label names with one designated negative label.

    Label index is the position in `labels` and is stable for the
    lifetime of the process.
    """

    labels: tuple[str, ...]
    negative_label: str = DEFAULT_NEGATIVE_LABEL

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if not self.labels:
            raise NoiseAuditError("label space must contain at least one label")
        seen = set()
        for name in self.labels:
            if not isinstance(name, str) or not name:
                raise NoiseAuditError(f"label names must be non-empty strings, got {name!r}")
            if name in seen:
                raise NoiseAuditError(f"duplicate label name: {name!r}")
            seen.add(name)
        if self.negative_label not in seen:
            raise NoiseAuditError(
                f"negative label {self.negative_label!r} is not a member of the label space"
            )

    @cached_property
    def _index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.labels)}

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise NoiseAuditError(f"unknown label: {label!r}") from None

    def __contains__(self, label: str) -> bool:
        return label in self._index

    def is_positive(self, label: str) -> bool:
        if label not in self._index:
            raise NoiseAuditError(f"unknown label: {label!r}")
        return label != self.negative_label

    @property
    def positive_labels(self) -> tuple[str, ...]:
        return tuple(l for l in self.labels if l != self.negative_label)

    @classmethod
    def from_file(cls, path: str | Path) -> "LabelSpace":
        """Parse a label-space file: one label per line, optional first
        line `negative=<name>` (default negative name: no_relation)."""
        lines = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()]
        lines = [ln for ln in lines if ln]
        negative = DEFAULT_NEGATIVE_LABEL
        if lines and lines[0].startswith("negative="):
            negative = lines[0][len("negative="):].strip()
            if not negative:
                raise NoiseAuditError(f"{path}: empty negative label name")
            lines = lines[1:]
        return cls(tuple(lines), negative)

    def to_file(self, path: str | Path) -> None:
        out = [f"negative={self.negative_label}"]
        out.extend(self.labels)
        Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class Instance:
    """A labeled sentence with two entity spans (inclusive end indices)."""

    id: str
    tokens: tuple[str, ...]
    subj_span: tuple[int, int]
    obj_span: tuple[int, int]
    subj_type: str
    obj_type: str
    relation: str
    split: str
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "subj_span", tuple(self.subj_span))
        object.__setattr__(self, "obj_span", tuple(self.obj_span))
        if not self.id or not isinstance(self.id, str):
            raise NoiseAuditError(f"instance id must be a non-empty string, got {self.id!r}")
        if self.split not in SPLITS:
            raise NoiseAuditError(f"instance {self.id}: split must be one of {SPLITS}, got {self.split!r}")
        n = len(self.tokens)
        for name, (start, end) in (("subj", self.subj_span), ("obj", self.obj_span)):
            if not (0 <= start <= end < n):
                raise NoiseAuditError(
                    f"instance {self.id}: {name} span ({start}, {end}) out of bounds for {n} tokens"
                )


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of instances under one label space.

    Iteration order is load order; ids are unique; every relation is a
    member of the label space.
    """

    label_space: LabelSpace
    instances: tuple[Instance, ...]

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        seen: set[str] = set()
        for inst in self.instances:
            if inst.id in seen:
                raise NoiseAuditError(f"duplicate instance id: {inst.id!r}")
            seen.add(inst.id)
            if inst.relation not in self.label_space:
                raise NoiseAuditError(
                    f"instance {inst.id}: unknown relation {inst.relation!r}"
                )

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)

    @cached_property
    def _by_id(self) -> dict[str, Instance]:
        return {inst.id: inst for inst in self.instances}

    def get(self, instance_id: str) -> Instance:
        try:
            return self._by_id[instance_id]
        except KeyError:
            raise NoiseAuditError(f"unknown instance id: {instance_id!r}") from None

    def __contains__(self, instance_id: str) -> bool:
        return instance_id in self._by_id

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(inst.id for inst in self.instances)

    def relations(self) -> list[str]:
        return [inst.relation for inst in self.instances]

    def restrict(self, instance_ids: Iterable[str]) -> "Dataset":
        """Keep only the given ids, preserving dataset order."""
        keep = set(instance_ids)
        missing = keep - set(self._by_id)
        if missing:
            raise NoiseAuditError(f"unknown instance id: {sorted(missing)[0]!r}")
        return Dataset(self.label_space, tuple(i for i in self.instances if i.id in keep))


class SplitCounts(NamedTuple):
    positive: int
    negative: int
    total: int


def split_counts(dataset: Dataset) -> dict[str, SplitCounts]:
    """Positive/negative/total instance counts per split.

    Positive means relation != negative_label; counts partition exactly.
    """
    pos = {s: 0 for s in SPLITS}
    neg = {s: 0 for s in SPLITS}
    negative = dataset.label_space.negative_label
    for inst in dataset.instances:
        if inst.relation == negative:
            neg[inst.split] += 1
        else:
            pos[inst.split] += 1
    return {s: SplitCounts(pos[s], neg[s], pos[s] + neg[s]) for s in SPLITS}


def _parse_record(rec: dict, line_no: int, path, label_space: LabelSpace, split: str) -> Instance:
    if not isinstance(rec, dict):
        raise NoiseAuditError(f"{path}:{line_no}: record is not a JSON object")
    missing = [f for f in _RECORD_FIELDS if f not in rec]
    if missing:
        raise NoiseAuditError(f"{path}:{line_no}: missing fields {missing}")
    tokens = rec["token"]
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        raise NoiseAuditError(f"{path}:{line_no}: 'token' must be a list of strings")
    relation = rec["relation"]
    if relation not in label_space:
        raise NoiseAuditError(f"{path}:{line_no}: unknown relation {relation!r}")
    try:
        return Instance(
            id=rec["id"],
            tokens=tuple(tokens),
            subj_span=(
                _require_int(rec["subj_start"], "subj_start"),
                _require_int(rec["subj_end"], "subj_end"),
            ),
            obj_span=(
                _require_int(rec["obj_start"], "obj_start"),
                _require_int(rec["obj_end"], "obj_end"),
            ),
            subj_type=rec["subj_type"],
            obj_type=rec["obj_type"],
            relation=relation,
            split=split,
            extra={k: v for k, v in rec.items() if k not in _RECORD_FIELDS},
        )
    except NoiseAuditError as exc:
        raise NoiseAuditError(f"{path}:{line_no}: {exc}") from None


def load_dataset(path: str | Path, label_space: LabelSpace, split: str = "train") -> Dataset:
    """Load one JSONL dataset file; all records belong to `split`.

    Malformed records are reported with their line number; unknown
    relations and duplicate ids are hard errors.
    """
    if split not in SPLITS:
        raise NoiseAuditError(f"split must be one of {SPLITS}, got {split!r}")
    instances: list[Instance] = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise NoiseAuditError(f"{path}:{line_no}: invalid JSON ({exc.msg})") from None
            instances.append(_parse_record(rec, line_no, path, label_space, split))
    return Dataset(label_space, tuple(instances))


def load_splits(
    label_space: LabelSpace,
    train: str | Path | None = None,
    dev: str | Path | None = None,
    test: str | Path | None = None,
) -> Dataset:
    """Load up to three split files into one dataset (train, dev, test order)."""
    parts: list[Instance] = []
    for split, path in (("train", train), ("dev", dev), ("test", test)):
        if path is None:
            continue
        parts.extend(load_dataset(path, label_space, split).instances)
    if not parts and train is None and dev is None and test is None:
        raise NoiseAuditError("no dataset files given")
    return Dataset(label_space, tuple(parts))


def record_line(inst: Instance) -> str:
    """Canonical one-line JSON serialization of an instance."""
    rec = {
        "id": inst.id,
        "token": list(inst.tokens),
        "subj_start": inst.subj_span[0],
        "subj_end": inst.subj_span[1],
        "obj_start": inst.obj_span[0],
        "obj_end": inst.obj_span[1],
        "subj_type": inst.subj_type,
        "obj_type": inst.obj_type,
        "relation": inst.relation,
    }
    rec.update(inst.extra)
    return json.dumps(rec, ensure_ascii=False)


def write_dataset(dataset: Dataset, path: str | Path, split: str | None = None) -> int:
    """Write instances (optionally one split only) as JSONL; returns count."""
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for inst in dataset.instances:
            if split is not None and inst.split != split:
                continue
            f.write(record_line(inst) + "\n")
            n += 1
    return n


@dataclass(frozen=True)
class NoiseManifest:
    """Elimination set and relabel map emitted by a detection strategy.

    `eliminate` is an ordered set of instance ids; `relabel` maps ids to
    replacement labels; `provenance` carries the strategy tag plus the
    parameter record (k, seed/pool/scope descriptions).
    """

    eliminate: tuple[str, ...]
    relabel: dict[str, str]
    provenance: dict

    def __post_init__(self):
        object.__setattr__(self, "eliminate", tuple(self.eliminate))
        validate_manifest(self)

    @property
    def strategy(self) -> str:
        return self.provenance["strategy"]

    @property
    def detected_ids(self) -> tuple[str, ...]:
        """Eliminate entries followed by relabel-only ids, in order."""
        seen = set(self.eliminate)
        extra = [i for i in self.relabel if i not in seen]
        return self.eliminate + tuple(extra)

    def to_dict(self) -> dict:
        return {
            "eliminate": list(self.eliminate),
            "relabel": dict(self.relabel),
            "provenance": dict(self.provenance),
        }


def validate_manifest(m: NoiseManifest, label_space: LabelSpace | None = None) -> None:
    """Check structural manifest invariants; raise on violation.

    With a label space, additionally checks that every relabel value is a
    member label.
    """
    if len(set(m.eliminate)) != len(m.eliminate):
        raise NoiseAuditError("manifest eliminate list contains duplicates")
    if not isinstance(m.provenance, dict) or "strategy" not in m.provenance:
        raise NoiseAuditError("manifest provenance must carry a 'strategy' tag")
    strategy = m.provenance["strategy"]
    if strategy not in MANIFEST_STRATEGIES:
        raise NoiseAuditError(
            f"unknown manifest strategy {strategy!r}; expected one of {MANIFEST_STRATEGIES}"
        )
    if strategy == "IS" and set(m.relabel) != set(m.eliminate):
        raise NoiseAuditError("IS manifest must have relabel keys equal to the eliminate set")
    if strategy == "ES-eliminate" and m.relabel:
        raise NoiseAuditError("ES-eliminate manifest must have an empty relabel map")
    if strategy == "ES-relabel" and m.eliminate:
        raise NoiseAuditError("ES-relabel manifest must have an empty eliminate set")
    for iid, label in m.relabel.items():
        if not isinstance(iid, str) or not isinstance(label, str):
            raise NoiseAuditError("relabel map must be {instance id -> label name}")
        if label_space is not None and label not in label_space:
            raise NoiseAuditError(f"relabel value {label!r} for {iid!r} is not in the label space")


def write_manifest(m: NoiseManifest, path: str | Path) -> None:
    validate_manifest(m)
    Path(path).write_text(json.dumps(m.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def read_manifest(path: str | Path, label_space: LabelSpace | None = None) -> NoiseManifest:
    """Read and validate a manifest file; invalid files are rejected."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise NoiseAuditError(f"{path}: invalid JSON ({exc.msg})") from None
    if not isinstance(doc, dict):
        raise NoiseAuditError(f"{path}: manifest must be a JSON object")
    for key in ("eliminate", "relabel", "provenance"):
        if key not in doc:
            raise NoiseAuditError(f"{path}: missing manifest key {key!r}")
    if not isinstance(doc["eliminate"], list) or not all(isinstance(x, str) for x in doc["eliminate"]):
        raise NoiseAuditError(f"{path}: 'eliminate' must be an array of instance ids")
    if not isinstance(doc["relabel"], dict):
        raise NoiseAuditError(f"{path}: 'relabel' must be an object")
    try:
        m = NoiseManifest(tuple(doc["eliminate"]), dict(doc["relabel"]), dict(doc["provenance"]))
        validate_manifest(m, label_space)
    except NoiseAuditError as exc:
        raise NoiseAuditError(f"{path}: {exc}") from None
    return m


def manifest_digest(path: str | Path) -> str:
    """SHA-256 of the manifest file bytes."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def relabeled(inst: Instance, label: str) -> Instance:
    return replace(inst, relation=label)
