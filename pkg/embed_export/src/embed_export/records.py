"""Minimal readers for the JSONL dataset schema and label-space files.

Only the fields the encoders consume are materialized; everything else in
a record is ignored. Validation stays light on purpose: the auditing
toolkit is the authority on dataset well-formedness.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


class ExportError(Exception):
    """Bad input or an encoder/classifier contract violation."""


@dataclass(frozen=True)
class Record:
    id: str
    tokens: tuple[str, ...]
    subj_type: str
    obj_type: str
    relation: str


def read_records(path: str | Path) -> list[Record]:
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ExportError(f"{path}:{line_no}: invalid JSON ({exc.msg})") from None
            try:
                records.append(Record(
                    id=rec["id"],
                    tokens=tuple(rec["token"]),
                    subj_type=rec.get("subj_type", ""),
                    obj_type=rec.get("obj_type", ""),
                    relation=rec.get("relation", ""),
                ))
            except KeyError as exc:
                raise ExportError(f"{path}:{line_no}: missing field {exc}") from None
    return records


def read_labels(path: str | Path) -> list[str]:
    """Label names in file order, skipping the optional negative= line.

    The strings are returned verbatim; they go into prediction files
    untouched.
    """
    lines = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()]
    lines = [ln for ln in lines if ln]
    if lines and lines[0].startswith("negative="):
        lines = lines[1:]
    if not lines:
        raise ExportError(f"{path}: label-space file contains no labels")
    return lines
