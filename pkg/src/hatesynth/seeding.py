"""Deterministic seed derivation and content digests.

All randomness in the pipeline flows through numpy's legacy RandomState,
whose streams are frozen across numpy versions and platforms. Seeds are
derived from string parts via SHA-256 so that the same logical event
(e.g. "substitution for post X under run seed S") always gets the same
stream, independent of Python's per-process hash salt.
"""

from __future__ import annotations

import hashlib

import numpy as np

_SEP = "\x1f"


def derive_seed(*parts: object) -> int:
    """Derive a 32-bit seed from an arbitrary tuple of parts."""
    joined = _SEP.join(str(p) for p in parts)
    digest = hashlib.sha256(joined.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


def derived_rng(*parts: object) -> np.random.RandomState:
    """RandomState seeded from derive_seed(*parts)."""
    return np.random.RandomState(derive_seed(*parts))


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
