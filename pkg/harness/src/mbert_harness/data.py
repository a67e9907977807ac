"""Readers for the pipeline's on-disk formats.

Deliberately self-contained: the harness consumes the synthesis package's
corpus JSON-Lines and entity-table CSV files without importing it.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from . import DataFormatError

HATEFUL = "hateful"
NON_HATEFUL = "non_hateful"
LABELS = (HATEFUL, NON_HATEFUL)

CATEGORIES = ("G", "I", "CT", "HT", "P", "NT")


def load_corpus(path) -> list[dict]:
    """Corpus JSON-Lines -> list of {id, text, label, ...} records."""
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"corpus file not found: {path}")
    records = []
    errors = []
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                errors.append(f"line {line_no}: invalid JSON ({exc.msg})")
                continue
            missing = [k for k in ("id", "text", "label", "lang")
                       if not isinstance(obj.get(k), str)]
            if missing:
                errors.append(f"line {line_no}: missing/invalid {missing}")
                continue
            if obj["label"] not in LABELS:
                errors.append(f"line {line_no}: bad label {obj['label']!r}")
                continue
            records.append(obj)
    if errors:
        raise DataFormatError(
            f"{path}: {len(errors)} invalid record(s):\n  " + "\n  ".join(errors))
    return records


def load_entity_surfaces(path) -> set[str]:
    """Entity-table CSV -> case-folded surface set."""
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"entity table not found: {path}")
    surfaces = set()
    with path.open(encoding="utf-8", newline="") as fh:
        rows = [line for line in fh if line.strip()
                and not line.lstrip().startswith("#")]
    reader = csv.reader(rows)
    header = next(reader, None)
    if header is None or [h.strip() for h in header[:2]] != ["category", "surface"]:
        raise DataFormatError(
            f"{path}: expected header 'category,surface', got {header!r}")
    for row in reader:
        if len(row) < 2:
            continue
        category, surface = row[0].strip(), row[1].strip()
        if category not in CATEGORIES:
            raise DataFormatError(f"{path}: unknown category {category!r}")
        if surface:
            surfaces.add(surface.casefold())
    return surfaces


def labels_to_ids(records) -> list[int]:
    return [1 if r["label"] == HATEFUL else 0 for r in records]
