"""Pluggable translation, generation, and NER clients plus the mask audit.

Real services sit behind a minimal HTTP JSON protocol so any provider can
be adapted; deterministic in-process mocks cover tests and offline runs.

Wire formats:

* translation: ``POST {texts:[...], from:..., to:...}`` -> ``{translations:[...]}``
* generation:  ``POST {prompt, max_new_tokens, repetition_penalty, sample,
  stop:[...]}`` -> ``{text}``
* NER:         ``POST {text}`` -> ``{entities:[{start,end,label}]}``

Bearer tokens are read from an environment variable named in the client
config, never stored in files.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

from .ces import MaskedPost, MatchSpan
from .corpus import Post
from .entity_table import CATEGORIES, MASK_TOKENS
from .errors import (BackendError, ConfigError, EmptyGenerationError,
                     TransportError)
from .seeding import derived_rng, sha256_text

# Tolerant mask matcher: case-insensitive, optional whitespace inside the
# angle brackets. Used only for repair, never for normal masking.
_TOLERANT_MASK_RE = re.compile(
    r"<\s*MASK\s*-\s*(G|I|CT|HT|P|NT)\s*>", re.IGNORECASE)

VERDICT_PRESERVED = "preserved"
VERDICT_REPAIRED = "repaired"
VERDICT_DROPPED = "dropped"


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    backoff_base: float = 1.0
    sleep: Callable[[float], None] = time.sleep

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ConfigError(f"max_attempts must be >= 1, got {self.max_attempts}")


def _with_retries(call: Callable[[], object], retry: RetryPolicy,
                  describe: str):
    last = None
    for attempt in range(retry.max_attempts):
        try:
            return call()
        except TransportError as exc:
            last = exc
            if attempt + 1 < retry.max_attempts:
                retry.sleep(retry.backoff_base * (2 ** attempt))
    raise TransportError(
        f"{describe}: failed after {retry.max_attempts} attempts: {last}")


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    max_new_tokens: int = 100
    repetition_penalty: float = 2.0
    sample: bool = True
    stop_sequences: tuple = ()

    def __post_init__(self):
        if self.max_new_tokens <= 0:
            raise ConfigError(
                f"max_new_tokens must be > 0, got {self.max_new_tokens}")
        if self.repetition_penalty < 1:
            raise ConfigError(
                f"repetition_penalty must be >= 1, got {self.repetition_penalty}")


@dataclass(frozen=True)
class GenerationResult:
    text: str


@dataclass
class MaskAudit:
    """Before/after mask-token counts around one translation.

    ``masks_after`` counts canonical mask literals in the raw translation,
    before any repair; the verdict is ``preserved`` exactly when those raw
    counts already match.
    """

    origin_id: str
    masks_before: dict[str, int]
    masks_after: dict[str, int]
    verdict: str


# ---------------------------------------------------------------------------
# HTTP clients
# ---------------------------------------------------------------------------

def _bearer_headers(token_env: Optional[str]) -> dict[str, str]:
    headers = {"Content-Type": "application/json"}
    if token_env:
        token = os.environ.get(token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
    return headers


class _HttpClient:
    def __init__(self, url: str, token_env: Optional[str] = None,
                 timeout: float = 30.0):
        self.url = url
        self.token_env = token_env
        self.timeout = timeout

    def post_json(self, payload: dict) -> dict:
        import requests

        try:
            response = requests.post(self.url, json=payload,
                                     headers=_bearer_headers(self.token_env),
                                     timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"POST {self.url} failed: {exc}") from exc
        if response.status_code >= 500:
            raise TransportError(
                f"POST {self.url} returned {response.status_code}")
        if response.status_code != 200:
            raise BackendError(
                f"POST {self.url} returned {response.status_code}: "
                f"{response.text[:500]}")
        try:
            return response.json()
        except ValueError as exc:
            raise BackendError(f"POST {self.url}: invalid JSON reply") from exc


class HttpTranslationBackend(_HttpClient):
    def translate(self, texts: Sequence[str], from_lang: str,
                  to_lang: str) -> list[str]:
        reply = self.post_json({"texts": list(texts), "from": from_lang,
                                "to": to_lang})
        translations = reply.get("translations")
        if not isinstance(translations, list) or len(translations) != len(texts):
            raise BackendError(
                f"translation reply has {len(translations or [])} items "
                f"for {len(texts)} texts")
        return [str(t) for t in translations]


class HttpGenerationBackend(_HttpClient):
    def generate(self, request: GenerationRequest) -> str:
        reply = self.post_json({
            "prompt": request.prompt,
            "max_new_tokens": request.max_new_tokens,
            "repetition_penalty": request.repetition_penalty,
            "sample": request.sample,
            "stop": list(request.stop_sequences),
        })
        if "text" not in reply:
            raise BackendError("generation reply missing 'text'")
        return str(reply["text"])


class HttpNerBackend(_HttpClient):
    def entities(self, text: str) -> list[dict]:
        reply = self.post_json({"text": text})
        entities = reply.get("entities")
        if not isinstance(entities, list):
            raise BackendError("NER reply missing 'entities' list")
        return entities


# ---------------------------------------------------------------------------
# mock backends
# ---------------------------------------------------------------------------

class MockTranslationBackend:
    """Deterministic, mask-preserving stand-in for a translation service.

    Every non-mask token goes through a reversible prefix transform; mask
    tokens are copied verbatim. With token_prefix="" it degenerates to the
    identity, which is handy for golden-path fixtures.
    """

    def __init__(self, token_prefix: str = "t:"):
        self.token_prefix = token_prefix
        self.calls = 0
        self._lock = threading.Lock()

    def _map_token(self, token: str) -> str:
        if token in MASK_TOKENS.values():
            return token
        return self.token_prefix + token

    def translate(self, texts: Sequence[str], from_lang: str,
                  to_lang: str) -> list[str]:
        with self._lock:
            self.calls += 1
        return [" ".join(self._map_token(t) for t in text.split())
                for text in texts]

    def untranslate(self, text: str) -> str:
        n = len(self.token_prefix)
        return " ".join(t[n:] if n and t.startswith(self.token_prefix) else t
                        for t in text.split())


class MutatingTranslationBackend:
    """Test double that damages mask tokens at seeded rates.

    Per mask-token occurrence: deleted with probability ``p_delete``,
    case/whitespace-mutated with probability ``p_mutate``, else passed
    through. Non-mask tokens follow the inner backend's transform.
    """

    def __init__(self, inner=None, p_mutate: float = 0.10,
                 p_delete: float = 0.05, seed: int = 0):
        self.inner = inner if inner is not None else MockTranslationBackend()
        self.p_mutate = p_mutate
        self.p_delete = p_delete
        self.actions: list[list[str]] = []  # per text, per mask token
        self._rng = derived_rng("mutating-backend", seed)
        self._lock = threading.Lock()

    def _mutate(self, token: str) -> str:
        style = int(self._rng.randint(3))
        if style == 0:
            return token.lower()
        if style == 1:
            return token.replace("<MASK-", "< MASK-").replace(">", " >")
        return token.swapcase()

    def translate(self, texts, from_lang, to_lang):
        base = self.inner.translate(texts, from_lang, to_lang)
        out = []
        with self._lock:
            for text in base:
                tokens = []
                actions = []
                for token in text.split():
                    if token not in MASK_TOKENS.values():
                        tokens.append(token)
                        continue
                    roll = float(self._rng.random_sample())
                    if roll < self.p_delete:
                        actions.append("delete")
                        continue
                    if roll < self.p_delete + self.p_mutate:
                        actions.append("mutate")
                        tokens.append(self._mutate(token))
                    else:
                        actions.append("keep")
                        tokens.append(token)
                self.actions.append(actions)
                out.append(" ".join(tokens))
        return out


class FlakyBackend:
    """Wraps any backend; fails with TransportError for the first n calls."""

    def __init__(self, inner, failures: int):
        self.inner = inner
        self.failures = failures
        self.attempts = 0

    def _maybe_fail(self):
        self.attempts += 1
        if self.attempts <= self.failures:
            raise TransportError(f"synthetic failure {self.attempts}")

    def translate(self, texts, from_lang, to_lang):
        self._maybe_fail()
        return self.inner.translate(texts, from_lang, to_lang)

    def generate(self, request):
        self._maybe_fail()
        return self.inner.generate(request)

    def entities(self, text):
        self._maybe_fail()
        return self.inner.entities(text)


class MockGenerationBackend:
    """Deterministic generation stand-in.

    Canned responses are served in order when provided; afterwards (or when
    none are given) the reply is synthesized from a digest of the prompt,
    so identical prompts always yield identical text.
    """

    def __init__(self, responses: Optional[Sequence[str]] = None):
        self._responses = list(responses or [])
        self._served = 0
        self.calls = 0
        self.prompts: list[str] = []
        self._lock = threading.Lock()

    @classmethod
    def from_json(cls, path) -> "MockGenerationBackend":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        return cls(responses=data.get("responses", []))

    def generate(self, request: GenerationRequest) -> str:
        with self._lock:
            self.calls += 1
            self.prompts.append(request.prompt)
            if self._served < len(self._responses):
                text = self._responses[self._served]
                self._served += 1
                return text
        digest = sha256_text(request.prompt)[:12]
        return f"synthetic post {digest}"


class MockNerBackend:
    """Finds fixture surfaces in the text and tags them."""

    def __init__(self, entities: Optional[dict[str, str]] = None):
        self.fixtures = dict(entities or {})

    @classmethod
    def from_json(cls, path) -> "MockNerBackend":
        with open(path, encoding="utf-8") as fh:
            return cls(entities=json.load(fh))

    def entities(self, text: str) -> list[dict]:
        found = []
        for surface, label in self.fixtures.items():
            start = 0
            while True:
                pos = text.find(surface, start)
                if pos < 0:
                    break
                found.append({"start": pos, "end": pos + len(surface),
                              "label": label})
                start = pos + len(surface)
        found.sort(key=lambda e: e["start"])
        return found


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def _count_exact_masks(text: str) -> dict[str, int]:
    counts = Counter()
    for cat, token in MASK_TOKENS.items():
        counts[cat] = text.count(token)
    return dict(counts)


def _canonicalize_masks(text: str) -> str:
    return _TOLERANT_MASK_RE.sub(lambda m: MASK_TOKENS[m.group(1).upper()], text)


def audit_translation(masked: MaskedPost, translated: str) -> tuple[str, MaskAudit]:
    """Compare mask counts around a translation; repair when unambiguous.

    Returns the (possibly repaired) text plus the audit. Posts whose masks
    cannot be restored get verdict ``dropped`` and must not reach
    substitution.
    """
    before = _count_exact_masks(masked.text)
    after_raw = _count_exact_masks(translated)
    if after_raw == before:
        return translated, MaskAudit(masked.origin, before, after_raw,
                                     VERDICT_PRESERVED)
    repaired = _canonicalize_masks(translated)
    if _count_exact_masks(repaired) == before:
        return repaired, MaskAudit(masked.origin, before, after_raw,
                                   VERDICT_REPAIRED)
    return translated, MaskAudit(masked.origin, before, after_raw,
                                 VERDICT_DROPPED)


def _batch_digest(texts: Sequence[str], from_lang: str, to_lang: str) -> str:
    payload = json.dumps({"texts": list(texts), "from": from_lang,
                          "to": to_lang}, ensure_ascii=False, sort_keys=True)
    return sha256_text(payload)


def translate_batch(items: Sequence, backend, from_lang: str, to_lang: str,
                    batch_size: int = 16,
                    retry: Optional[RetryPolicy] = None,
                    concurrency: int = 4) -> tuple[list[str], list[MaskAudit]]:
    """Translate posts or masked posts in batches, auditing mask survival.

    Results and audits come back in input order regardless of batch
    completion order. Batches are keyed by a content digest so a retried
    run never re-requests a batch that already succeeded.
    """
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    retry = retry or RetryPolicy()
    texts = []
    for item in items:
        if isinstance(item, MaskedPost):
            texts.append(item.text)
        elif isinstance(item, Post):
            texts.append(item.text)
        else:
            texts.append(str(item))
    batches = [(i, texts[i:i + batch_size])
               for i in range(0, len(texts), batch_size)]
    cache: dict[str, list[str]] = {}
    lock = threading.Lock()

    def batch_ids(offset: int, batch: list[str]) -> list[str]:
        window = items[offset:offset + len(batch)]
        return [getattr(i, "origin", getattr(i, "id", "?")) for i in window]

    def run_batch(job: tuple[int, list[str]]) -> list[str]:
        offset, batch = job
        digest = _batch_digest(batch, from_lang, to_lang)
        with lock:
            if digest in cache:
                return cache[digest]
        try:
            result = _with_retries(
                lambda: backend.translate(batch, from_lang, to_lang),
                retry, f"translate batch of {len(batch)}")
        except TransportError:
            raise
        except BackendError as exc:
            raise BackendError(
                f"{exc} (posts: {batch_ids(offset, batch)})") from exc
        if len(result) != len(batch):
            raise BackendError(
                f"backend returned {len(result)} translations for "
                f"{len(batch)} texts (posts: {batch_ids(offset, batch)})")
        with lock:
            cache[digest] = result
        return result

    if concurrency > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            translated_batches = list(pool.map(run_batch, batches))
    else:
        translated_batches = [run_batch(b) for b in batches]
    flat = [t for batch in translated_batches for t in batch]

    out_texts = []
    audits = []
    for item, raw in zip(items, flat):
        if isinstance(item, MaskedPost):
            text, audit = audit_translation(item, raw)
        else:
            origin = getattr(item, "id", "?")
            counts = {cat: 0 for cat in CATEGORIES}
            text, audit = raw, MaskAudit(origin, counts, dict(counts),
                                         VERDICT_PRESERVED)
        out_texts.append(text)
        audits.append(audit)
    return out_texts, audits


def translate_masked(posts: Sequence[MaskedPost], backend, from_lang: str,
                     to_lang: str, **kwargs) -> tuple[list[MaskedPost], list[MaskAudit]]:
    """Translate masked posts, rebuilding spans over the translated text.

    Dropped posts are excluded from the returned list (their audits remain),
    so downstream substitution can never see a post that lost masks.
    """
    texts, audits = translate_batch(posts, backend, from_lang, to_lang, **kwargs)
    survivors = []
    for masked, text, audit in zip(posts, texts, audits):
        if audit.verdict == VERDICT_DROPPED:
            continue
        tokens = text.split()
        old_spans = sorted(masked.spans, key=lambda s: s.token_start)
        spans = []
        span_idx = 0
        for i, token in enumerate(tokens):
            cat = next((c for c, t in MASK_TOKENS.items() if t == token), None)
            if cat is None:
                continue
            carried = old_spans[span_idx] if span_idx < len(old_spans) else None
            span_idx += 1
            spans.append(MatchSpan(
                i, i + 1,
                carried.surface_matched if carried else token,
                cat,
                carried.similarity if carried else 1.0,
                ner_origin=carried.ner_origin if carried else False))
        survivors.append(MaskedPost(origin=masked.origin, text=text,
                                    spans=spans, lang=to_lang))
    return survivors, audits


def generate_text(request: GenerationRequest, backend,
                  retry: Optional[RetryPolicy] = None) -> GenerationResult:
    """Run one generation call, truncating at the first stop sequence."""
    retry = retry or RetryPolicy()
    raw = _with_retries(lambda: backend.generate(request), retry, "generate")
    text = str(raw)
    cut = len(text)
    for stop in request.stop_sequences:
        pos = text.find(stop)
        if pos >= 0:
            cut = min(cut, pos)
    text = text[:cut].strip()
    if not text:
        raise EmptyGenerationError("backend produced an empty generation")
    return GenerationResult(text=text)


def ner_persons(text: str, backend,
                retry: Optional[RetryPolicy] = None) -> list[tuple[int, int]]:
    """Character spans tagged PERSON, validated against the text bounds."""
    retry = retry or RetryPolicy()
    entities = _with_retries(lambda: backend.entities(text), retry, "ner")
    spans = []
    for ent in entities:
        if str(ent.get("label", "")) != "PERSON":
            continue
        start, end = ent.get("start"), ent.get("end")
        if (not isinstance(start, int) or not isinstance(end, int)
                or start < 0 or end > len(text) or start >= end):
            raise BackendError(
                f"malformed NER span ({start}, {end}) for text of "
                f"length {len(text)}")
        spans.append((start, end))
    spans.sort()
    for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
        if s2 < e1:
            raise BackendError(
                f"overlapping NER spans ({s1},{e1}) and ({s2},{e2})")
    return spans


# ---------------------------------------------------------------------------
# audit IO
# ---------------------------------------------------------------------------

def audit_to_json(audit: MaskAudit) -> str:
    record = {"origin_id": audit.origin_id,
              "masks_before": {c: audit.masks_before.get(c, 0) for c in CATEGORIES},
              "masks_after": {c: audit.masks_after.get(c, 0) for c in CATEGORIES},
              "verdict": audit.verdict}
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def save_audits(audits: Sequence[MaskAudit], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for audit in audits:
            fh.write(audit_to_json(audit) + "\n")
