"""Per-language gazetteers mapping surface forms to mask categories.

Six categories: target groups (G), target individuals (I), target countries
(CT), hate terms (HT), political groups (P), and non-target countries (NT)
for entities that appear in hateful posts without being the target. Each
category owns a mask token literal such as ``<MASK-HT>`` that stands in for
a removed entity and is designed to survive machine translation.

On disk a table is UTF-8 CSV with header ``category,surface``; lines
starting with ``#`` are comments. A ``# lang: xx`` comment declares the
table's language tag.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EntityTableError

CATEGORIES = ("G", "I", "CT", "HT", "P", "NT")

MASK_TOKENS = {cat: f"<MASK-{cat}>" for cat in CATEGORIES}
CATEGORY_OF_MASK = {tok: cat for cat, tok in MASK_TOKENS.items()}

# Matches canonical mask literals only; the tolerant variant lives in
# backends.py where translation damage gets repaired.
MASK_TOKEN_RE = re.compile(r"<MASK-(G|I|CT|HT|P|NT)>")

_LANG_COMMENT_RE = re.compile(r"#\s*lang\s*:\s*(\S+)")


def mask_token(category: str) -> str:
    if category not in MASK_TOKENS:
        raise EntityTableError(f"unknown category code {category!r}")
    return MASK_TOKENS[category]


@dataclass
class EntityTable:
    """Gazetteer for one language; every category key is always present."""

    lang: str = ""
    entries: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        for cat in CATEGORIES:
            self.entries.setdefault(cat, [])
        problems = validate_entries(self.entries)
        if problems:
            raise EntityTableError(
                "invalid entity table: " + "; ".join(problems))

    def surfaces(self, category: str) -> list[str]:
        return self.entries[category]

    def all_surfaces(self) -> list[tuple[str, str]]:
        """(category, surface) pairs in category order."""
        out = []
        for cat in CATEGORIES:
            out.extend((cat, s) for s in self.entries[cat])
        return out


def validate_entries(entries: dict) -> list[str]:
    problems = []
    for cat, surfaces in entries.items():
        if cat not in CATEGORIES:
            problems.append(f"unknown category code {cat!r}")
            continue
        seen = set()
        dupes = []
        for surface in surfaces:
            if not surface or not surface.strip():
                problems.append(f"empty surface in category {cat}")
            if surface in seen:
                dupes.append(surface)
            seen.add(surface)
        if dupes:
            problems.append(
                f"duplicate surfaces in category {cat}: "
                + ", ".join(repr(d) for d in sorted(set(dupes))))
    return problems


def builtin_table_path(lang: str) -> Path:
    """Path of the example table shipped for a language tag."""
    path = Path(__file__).parent / "data" / f"entities_{lang}.csv"
    if not path.exists():
        shipped = sorted(p.stem.split("_", 1)[1]
                         for p in (Path(__file__).parent / "data").glob("entities_*.csv"))
        raise EntityTableError(
            f"no example table for lang {lang!r}; shipped: {shipped}")
    return path


def load_entity_table(path, lang: str | None = None) -> EntityTable:
    """Load and validate a CSV entity table.

    All validation problems are collected before the load fails.
    """
    path = Path(path)
    if not path.exists():
        raise EntityTableError(f"entity table not found: {path}")
    entries: dict[str, list[str]] = {cat: [] for cat in CATEGORIES}
    extra: dict[str, list[str]] = {}
    problems: list[str] = []
    file_lang = ""
    with path.open(encoding="utf-8", newline="") as fh:
        rows = []
        for raw in fh:
            stripped = raw.strip()
            if stripped.startswith("#"):
                m = _LANG_COMMENT_RE.match(stripped)
                if m:
                    file_lang = m.group(1)
                continue
            if stripped:
                rows.append(raw)
        reader = csv.reader(rows)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["category", "surface"]:
            raise EntityTableError(
                f"{path}: expected header 'category,surface', got {header!r}")
        for line_no, row in enumerate(reader, start=2):
            if len(row) < 2:
                problems.append(f"row {line_no}: expected 2 columns, got {len(row)}")
                continue
            cat, surface = row[0].strip(), row[1].strip()
            if cat in entries:
                entries[cat].append(surface)
            else:
                extra.setdefault(cat, []).append(surface)
    for cat in extra:
        problems.append(f"unknown category code {cat!r}")
    problems.extend(validate_entries(entries))
    if problems:
        raise EntityTableError(
            f"{path}: invalid entity table: " + "; ".join(problems))
    return EntityTable(lang=lang if lang is not None else file_lang,
                       entries=entries)


def save_entity_table(table: EntityTable, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        if table.lang:
            fh.write(f"# lang: {table.lang}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["category", "surface"])
        for cat in CATEGORIES:
            for surface in table.entries[cat]:
                writer.writerow([cat, surface])


def table_stats(table: EntityTable) -> dict[str, int]:
    """Exact entry counts per category."""
    return {cat: len(table.entries[cat]) for cat in CATEGORIES}


@dataclass
class PairReport:
    """Feasibility check between a source and a target table."""

    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    @property
    def empty(self) -> bool:
        return not self.errors and not self.warnings


def _cross_category_duplicates(table: EntityTable) -> dict[str, list[str]]:
    owner: dict[str, list[str]] = {}
    for cat in CATEGORIES:
        for surface in table.entries[cat]:
            owner.setdefault(surface, []).append(cat)
    return {s: cats for s, cats in owner.items() if len(cats) > 1}


def validate_pair(source: EntityTable, target: EntityTable) -> PairReport:
    """Check that substitution from source masks into target is feasible.

    A category that is populated in the source but empty in the target makes
    substitution for its mask impossible, which is an error. Surfaces listed
    under more than one category are reported as warnings.
    """
    report = PairReport()
    for cat in CATEGORIES:
        if source.entries[cat] and not target.entries[cat]:
            report.errors.append(
                f"category {cat} has {len(source.entries[cat])} source "
                f"entries but no target entries; substitution impossible")
    for name, table in (("source", source), ("target", target)):
        for surface, cats in sorted(_cross_category_duplicates(table).items()):
            report.warnings.append(
                f"{name} surface {surface!r} appears in categories "
                + ", ".join(cats))
    return report
