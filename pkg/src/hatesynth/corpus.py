"""Labeled post collections: JSON-Lines IO, cleaning, and seeded sampling.

A corpus file is UTF-8 JSON-Lines with one object per line. Required keys:
``id``, ``text``, ``label`` ("hateful" | "non_hateful"), ``lang``. Optional:
``source``, ``method`` ("original" | "mt" | "ces" | "lm") and, for generated
posts, a ``lineage`` object. The writer emits keys in exactly that order so
identical datasets serialize to identical bytes.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, NamedTuple, Optional

from .errors import CorpusError
from .seeding import derived_rng

HATEFUL = "hateful"
NON_HATEFUL = "non_hateful"
LABELS = (HATEFUL, NON_HATEFUL)
METHODS = ("original", "mt", "ces", "lm")

# Social-media noise stripped before the token-length filter. URLs go first
# so their @/# innards never leave partial matches behind.
_URL_RE = re.compile(r"(?:https?://|www\.)\S+")
_MENTION_RE = re.compile(r"@\w+")
_HASHTAG_RE = re.compile(r"#\w+")
# Emoji blocks: emoticons, misc pictographs, transport, supplemental
# symbols, plus variation selectors and the ZWJ that glues sequences.
_EMOJI_RE = re.compile(
    "["
    "\U0001F300-\U0001F5FF"   # misc symbols & pictographs
    "\U0001F600-\U0001F64F"   # emoticons
    "\U0001F680-\U0001F6FF"   # transport & map symbols
    "\U0001F900-\U0001F9FF"   # supplemental symbols & pictographs
    "︀-️"           # variation selectors
    "‍"                  # zero-width joiner
    "]"
)

MIN_TOKENS = 3  # posts survive only with strictly more than two tokens


class Counts(NamedTuple):
    non_hateful: int
    hateful: int


@dataclass(frozen=True)
class Post:
    """One labeled text item; the unit flowing through every stage."""

    id: str
    text: str
    label: str
    lang: str
    source: str = ""
    method: str = "original"
    lineage: Optional[dict] = None


@dataclass
class Dataset:
    """An ordered list of posts with derived per-label tallies."""

    posts: list[Post] = field(default_factory=list)

    @property
    def counts(self) -> Counts:
        tally = Counter(p.label for p in self.posts)
        return Counts(tally[NON_HATEFUL], tally[HATEFUL])

    def __len__(self) -> int:
        return len(self.posts)

    def __iter__(self):
        return iter(self.posts)

    def hateful(self) -> list[Post]:
        return [p for p in self.posts if p.label == HATEFUL]

    def non_hateful(self) -> list[Post]:
        return [p for p in self.posts if p.label == NON_HATEFUL]


def _parse_record(obj: dict, line_no: int, errors: list[str]) -> Optional[Post]:
    if not isinstance(obj, dict):
        errors.append(f"line {line_no}: record is not a JSON object")
        return None
    problems = []
    for key in ("id", "text", "label", "lang"):
        value = obj.get(key)
        if not isinstance(value, str):
            problems.append(f"missing or non-string '{key}'")
    label = obj.get("label")
    if isinstance(label, str) and label not in LABELS:
        problems.append(f"label must be one of {LABELS}, got {label!r}")
    method = obj.get("method", "original")
    if method not in METHODS:
        problems.append(f"method must be one of {METHODS}, got {method!r}")
    source = obj.get("source", "")
    if not isinstance(source, str):
        problems.append("'source' must be a string")
    lineage = obj.get("lineage")
    if lineage is not None and not isinstance(lineage, dict):
        problems.append("'lineage' must be an object")
    if problems:
        errors.append(f"line {line_no}: " + "; ".join(problems))
        return None
    return Post(id=obj["id"], text=obj["text"], label=obj["label"],
                lang=obj["lang"], source=source, method=method,
                lineage=lineage)


def load_corpus(path, expected_lang: Optional[str] = None) -> Dataset:
    """Load a JSON-Lines corpus file, failing on any malformed record.

    Every schema problem is collected with its line number before the load
    fails, so one pass reports them all.
    """
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")
    posts: list[Post] = []
    errors: list[str] = []
    seen_ids: dict[str, int] = {}
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                errors.append(f"line {line_no}: invalid JSON ({exc.msg})")
                continue
            post = _parse_record(obj, line_no, errors)
            if post is None:
                continue
            if post.id in seen_ids:
                errors.append(
                    f"line {line_no}: duplicate id {post.id!r} "
                    f"(first seen on line {seen_ids[post.id]})")
                continue
            if expected_lang is not None and post.lang != expected_lang:
                errors.append(
                    f"line {line_no}: lang {post.lang!r} does not match "
                    f"expected {expected_lang!r}")
                continue
            seen_ids[post.id] = line_no
            posts.append(post)
    if errors:
        raise CorpusError(
            f"{path}: {len(errors)} invalid record(s):\n  " + "\n  ".join(errors))
    return Dataset(posts)


def post_to_json(post: Post) -> str:
    """Serialize one post with the fixed key order."""
    obj = {"id": post.id, "text": post.text, "label": post.label,
           "lang": post.lang}
    if post.source:
        obj["source"] = post.source
    if post.method != "original":
        obj["method"] = post.method
    if post.lineage is not None:
        obj["lineage"] = post.lineage
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def save_corpus(dataset: Dataset, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for post in dataset.posts:
            fh.write(post_to_json(post) + "\n")


def corpus_bytes(dataset: Dataset) -> bytes:
    """Canonical serialization of a dataset, used for content digests."""
    return "".join(post_to_json(p) + "\n" for p in dataset.posts).encode("utf-8")


def clean_text(text: str) -> str:
    """Strip mentions, hashtags, URLs, and emoji; collapse whitespace."""
    text = _URL_RE.sub(" ", text)
    text = _MENTION_RE.sub(" ", text)
    text = _HASHTAG_RE.sub(" ", text)
    text = _EMOJI_RE.sub(" ", text)
    return " ".join(text.split())


def preprocess(post: Post) -> Optional[Post]:
    """Clean a post's text; drop it when too little survives.

    Returns None when the cleaned text has fewer than three
    whitespace-delimited tokens. The token count is taken after all
    removals, so stripped noise never keeps a post alive.
    """
    cleaned = clean_text(post.text)
    if len(cleaned.split()) < MIN_TOKENS:
        return None
    return replace(post, text=cleaned)


def preprocess_dataset(dataset: Dataset) -> Dataset:
    kept = []
    for post in dataset.posts:
        cleaned = preprocess(post)
        if cleaned is not None:
            kept.append(cleaned)
    return Dataset(kept)


def sample_hateful(dataset: Dataset, n: int, rng_seed: int) -> Dataset:
    """Draw n hateful posts uniformly without replacement, reproducibly."""
    hateful = dataset.hateful()
    if n > len(hateful):
        raise CorpusError(f"requested {n}, available {len(hateful)}")
    order = derived_rng("sample_hateful", rng_seed).permutation(len(hateful))
    return Dataset([hateful[i] for i in order[:n]])
