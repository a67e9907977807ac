"""Contextual entity substitution: fuzzy masking and seeded replacement.

The pipeline has two halves. Masking scans source-language posts for token
windows that resemble gazetteer surfaces (normalized edit-distance
similarity above a threshold) and replaces each match with its category's
mask token. Substitution later rewrites every mask token in a (typically
translated) masked post with an entity drawn from the target-language
table, producing synthetic posts that keep the hateful framing but carry
targets from the new context.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .corpus import HATEFUL, Post
from .entity_table import (CATEGORIES, CATEGORY_OF_MASK, EntityTable,
                           MASK_TOKENS)
from .errors import ConfigError, DataError, SubstitutionError
from .seeding import derived_rng

# Re-exported convenience wrappers around the dual-path kernels.
levenshtein = kernels.levenshtein

_MASK_SCAN_RE = re.compile("|".join(re.escape(t) for t in MASK_TOKENS.values()))

DEFAULT_PRIORITY = ("HT", "I", "G", "CT", "P", "NT")


def similarity(a: str, b: str) -> float:
    """Normalized edit-distance similarity in [0, 1].

    1 - distance / max(len); two empty strings count as identical (1.0).
    Equals 1.0 exactly when the strings are equal.
    """
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - kernels.levenshtein(a, b) / longest


@dataclass(frozen=True)
class MatchSpan:
    """A token window matched to a gazetteer surface."""

    token_start: int
    token_end: int  # exclusive
    surface_matched: str
    category: str
    similarity: float
    ner_origin: bool = False

    def __post_init__(self):
        if self.token_start >= self.token_end:
            raise DataError(
                f"empty span [{self.token_start}, {self.token_end})")


@dataclass
class MaskedPost:
    """A post whose matched entity spans became category mask tokens."""

    origin: str
    text: str
    spans: list[MatchSpan]
    lang: str


@dataclass(frozen=True)
class MaskingConfig:
    threshold: float = 0.75
    max_ngram: int = 3
    case_fold: bool = True
    ner_fallback: str = "off"  # off | external
    category_priority: tuple = DEFAULT_PRIORITY

    def __post_init__(self):
        if not 0 < self.threshold <= 1:
            raise ConfigError(f"threshold must be in (0, 1], got {self.threshold}")
        if self.max_ngram < 1:
            raise ConfigError(f"max_ngram must be >= 1, got {self.max_ngram}")
        if self.ner_fallback not in ("off", "external"):
            raise ConfigError(
                f"ner_fallback must be 'off' or 'external', got {self.ner_fallback!r}")
        if sorted(self.category_priority) != sorted(CATEGORIES):
            raise ConfigError(
                f"category_priority must order {CATEGORIES}, got "
                f"{self.category_priority}")


@dataclass(frozen=True)
class SubstitutionConfig:
    """replacement_seed is the number of variants per masked post."""

    replacement_seed: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        if self.replacement_seed < 1:
            raise ConfigError(
                f"replacement_seed must be >= 1, got {self.replacement_seed}")


class SurfaceIndex:
    """Pre-encoded gazetteer surfaces for repeated window matching.

    Building the padded code-point matrix once per (table, config) pair and
    memoizing window lookups keeps corpus-scale masking off the slow path.
    """

    def __init__(self, table: EntityTable, config: MaskingConfig):
        self.config = config
        prio = {cat: i for i, cat in enumerate(config.category_priority)}
        entries = []  # (folded surface, original surface, category)
        for cat, surface in table.all_surfaces():
            folded = surface.casefold() if config.case_fold else surface
            entries.append((folded, surface, cat))
        # Deterministic candidate order: better priority first, then surface.
        entries.sort(key=lambda e: (prio[e[2]], e[0]))
        self._folded = [e[0] for e in entries]
        self._surfaces = [e[1] for e in entries]
        self._cats = [e[2] for e in entries]
        self._prio = prio
        self._exact = {}
        for folded, surface, cat in entries:
            self._exact.setdefault(folded, (surface, cat))
        if entries:
            self._matrix, self._lens = kernels.pad_encode(self._folded)
        else:
            self._matrix = np.zeros((0, 1), dtype=np.int32)
            self._lens = np.zeros(0, dtype=np.int64)
        self._cache: dict[str, Optional[tuple[float, str, str]]] = {}

    def fold(self, text: str) -> str:
        return text.casefold() if self.config.case_fold else text

    def best_match(self, window: str) -> Optional[tuple[float, str, str]]:
        """(similarity, surface, category) of the best match, or None.

        Candidates must beat the threshold strictly; ties break by category
        priority, then lexicographically smallest surface.
        """
        folded = self.fold(window)
        if folded in self._cache:
            return self._cache[folded]
        result = self._match_uncached(folded)
        self._cache[folded] = result
        return result

    def _match_uncached(self, folded: str) -> Optional[tuple[float, str, str]]:
        exact = self._exact.get(folded)
        if exact is not None:
            return (1.0, exact[0], exact[1])
        if not self._folded:
            return None
        lw = len(folded)
        longest = np.maximum(self._lens, lw)
        # dist >= |len difference|, so windows too different in length can
        # never clear the threshold and are skipped before the DP kernel.
        limit = (1.0 - self.config.threshold) * longest
        keep = np.abs(self._lens - lw) < limit
        if not keep.any():
            return None
        idx = np.nonzero(keep)[0]
        dists = kernels.levenshtein_to_many(
            folded, self._matrix[idx], self._lens[idx])
        sims = 1.0 - dists / longest[idx]
        best = None
        for pos, sim in zip(idx, sims):
            if sim <= self.config.threshold:
                continue
            key = (-sim, self._prio[self._cats[pos]], self._folded[pos])
            if best is None or key < best[0]:
                best = (key, float(sim), self._surfaces[pos], self._cats[pos])
        if best is None:
            return None
        return (best[1], best[2], best[3])


def find_matches(tokens: Sequence[str], table: EntityTable,
                 config: MaskingConfig,
                 index: Optional[SurfaceIndex] = None) -> list[MatchSpan]:
    """Non-overlapping spans of token windows matching table surfaces.

    Every window of 1..max_ngram tokens is compared against the table;
    candidates above the threshold compete for tokens with longest span
    first, then highest similarity, then category priority, then leftmost.
    """
    if index is None:
        index = SurfaceIndex(table, config)
    prio = {cat: i for i, cat in enumerate(config.category_priority)}
    candidates = []
    n = len(tokens)
    for width in range(1, config.max_ngram + 1):
        for start in range(0, n - width + 1):
            window = " ".join(tokens[start:start + width])
            hit = index.best_match(window)
            if hit is None:
                continue
            sim, surface, cat = hit
            candidates.append(MatchSpan(start, start + width, surface, cat, sim))
    candidates.sort(key=lambda s: (-(s.token_end - s.token_start),
                                   -s.similarity,
                                   prio[s.category],
                                   s.token_start))
    claimed = [False] * n
    accepted = []
    for span in candidates:
        if any(claimed[i] for i in range(span.token_start, span.token_end)):
            continue
        for i in range(span.token_start, span.token_end):
            claimed[i] = True
        accepted.append(span)
    accepted.sort(key=lambda s: s.token_start)
    return accepted


def _token_char_offsets(text: str) -> list[tuple[int, int, int]]:
    """(token_index, char_start, char_end) for each whitespace token."""
    out = []
    for i, m in enumerate(re.finditer(r"\S+", text)):
        out.append((i, m.start(), m.end()))
    return out


def _ner_spans(post: Post, existing: list[MatchSpan], ner,
               tokens: Sequence[str]) -> list[MatchSpan]:
    from .backends import ner_persons  # local import to avoid a cycle

    try:
        char_spans = ner_persons(post.text, ner)
    except Exception as exc:
        raise DataError(f"NER fallback failed for post {post.id!r}: {exc}") from exc
    offsets = _token_char_offsets(post.text)
    taken = set()
    for span in existing:
        taken.update(range(span.token_start, span.token_end))
    found = []
    for start, end in char_spans:
        covering = [i for i, cs, ce in offsets if cs < end and ce > start]
        if not covering:
            continue
        t0, t1 = covering[0], covering[-1] + 1
        if any(i in taken for i in range(t0, t1)):
            continue
        taken.update(range(t0, t1))
        found.append(MatchSpan(t0, t1, " ".join(tokens[t0:t1]), "I", 1.0,
                               ner_origin=True))
    return found


def mask_post(post: Post, table: EntityTable, config: MaskingConfig,
              ner=None, index: Optional[SurfaceIndex] = None) -> MaskedPost:
    """Replace matched entity spans with category mask tokens.

    Expects a preprocessed post (single-space separated tokens). Posts with
    no matches come back unchanged with an empty span list. With
    ner_fallback="external", PERSON entities reported by the NER client are
    masked as individuals wherever they do not overlap a table match.
    """
    tokens = post.text.split()
    spans = find_matches(tokens, table, config, index=index)
    if config.ner_fallback == "external":
        if ner is None:
            raise ConfigError("ner_fallback is 'external' but no NER client given")
        spans = sorted(spans + _ner_spans(post, spans, ner, tokens),
                       key=lambda s: s.token_start)
    out_tokens = []
    pos = 0
    for span in spans:
        out_tokens.extend(tokens[pos:span.token_start])
        out_tokens.append(MASK_TOKENS[span.category])
        pos = span.token_end
    out_tokens.extend(tokens[pos:])
    return MaskedPost(origin=post.id, text=" ".join(out_tokens), spans=spans,
                      lang=post.lang)


def unmask_text(masked: MaskedPost, original_tokens: Sequence[str]) -> str:
    """Reconstruct the original text from a masked post plus its tokens."""
    out = []
    spans = sorted(masked.spans, key=lambda s: s.token_start)
    it = iter(spans)
    current = next(it, None)
    for token in masked.text.split():
        if current is not None and token == MASK_TOKENS[current.category]:
            out.extend(original_tokens[current.token_start:current.token_end])
            current = next(it, None)
        else:
            out.append(token)
    return " ".join(out)


def substitute(masked: MaskedPost, target_table: EntityTable,
               config: SubstitutionConfig,
               rng: Optional[np.random.RandomState] = None) -> list[Post]:
    """Replace each mask token with a seeded draw from the target table.

    Produces exactly ``replacement_seed`` variants. When no generator is
    passed, one is derived from (rng_seed, origin id) so that per-post
    parallel substitution equals sequential output.
    """
    if rng is None:
        rng = derived_rng("substitute", config.rng_seed, masked.origin)
    matches = list(_MASK_SCAN_RE.finditer(masked.text))
    for m in matches:
        cat = CATEGORY_OF_MASK[m.group(0)]
        if not target_table.entries[cat]:
            raise SubstitutionError(
                f"post {masked.origin!r}: target table has no entries for "
                f"category {cat}")
    variants = []
    for v in range(config.replacement_seed):
        pieces = []
        pos = 0
        for m in matches:
            cat = CATEGORY_OF_MASK[m.group(0)]
            surfaces = target_table.entries[cat]
            choice = surfaces[int(rng.randint(len(surfaces)))]
            pieces.append(masked.text[pos:m.start()])
            pieces.append(choice)
            pos = m.end()
        pieces.append(masked.text[pos:])
        variants.append(Post(
            id=f"{masked.origin}-ces{v}",
            text="".join(pieces),
            label=HATEFUL,
            lang=target_table.lang or masked.lang,
            source="ces",
            method="ces",
            lineage={"origin_id": masked.origin},
        ))
    return variants


# ---------------------------------------------------------------------------
# masked-post JSON-Lines IO
# ---------------------------------------------------------------------------

def masked_to_json(masked: MaskedPost) -> str:
    spans = []
    for s in masked.spans:
        obj = {"start": s.token_start, "end": s.token_end,
               "category": s.category, "surface": s.surface_matched,
               "similarity": s.similarity}
        if s.ner_origin:
            obj["ner_origin"] = True
        spans.append(obj)
    record = {"origin_id": masked.origin, "text": masked.text,
              "spans": spans, "lang": masked.lang}
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def save_masked(posts: Sequence[MaskedPost], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for masked in posts:
            fh.write(masked_to_json(masked) + "\n")


def load_masked(path) -> list[MaskedPost]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"masked-post file not found: {path}")
    out = []
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: line {line_no}: invalid JSON ({exc.msg})")
            spans = [MatchSpan(s["start"], s["end"], s["surface"],
                               s["category"], s["similarity"],
                               ner_origin=s.get("ner_origin", False))
                     for s in obj.get("spans", [])]
            out.append(MaskedPost(origin=obj["origin_id"], text=obj["text"],
                                  spans=spans, lang=obj.get("lang", "")))
    return out


def mask_corpus(posts: Sequence[Post], table: EntityTable,
                config: MaskingConfig, ner=None) -> list[MaskedPost]:
    """Mask many posts sharing one surface index and window cache."""
    index = SurfaceIndex(table, config)
    return [mask_post(p, table, config, ner=ner, index=index) for p in posts]
