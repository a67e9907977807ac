"""Hot numeric kernels: batched edit distance and character n-gram hashing.

These two loops dominate runtime (fuzzy gazetteer matching compares every
token window against every table surface; featurization hashes every
character n-gram of every post). Each kernel has two interchangeable
implementations:

* a numba ``@njit`` version, used by default when numba imports cleanly;
* a pure-numpy version vectorized over the batch axis.

Set ``HATESYNTH_NUMBA=0`` (or ``false``/``off``/``no``) to force the numpy
path. Both paths return bit-identical results; ``tests/test_kernels.py``
asserts parity and ``benchmarks/bench_kernels.py`` compares their speed.
"""

from __future__ import annotations

import os
from typing import Sequence

import numpy as np

_FNV_OFFSET = np.uint64(0xCBF29CE484222325)
_FNV_PRIME = np.uint64(0x100000001B3)

_DISABLE_VALUES = {"0", "false", "off", "no"}


def _numba_enabled() -> bool:
    flag = os.environ.get("HATESYNTH_NUMBA", "1").strip().lower()
    return flag not in _DISABLE_VALUES


# ---------------------------------------------------------------------------
# numpy implementations (batch-vectorized fallback)
# ---------------------------------------------------------------------------

def _levenshtein_batch_numpy(query: np.ndarray, cands: np.ndarray,
                             lens: np.ndarray) -> np.ndarray:
    """Edit distance from one query to each padded candidate row.

    The DP recurrence is sequential in both string positions, so the numpy
    version vectorizes over the candidate axis instead: each inner step
    updates one DP column for all candidates at once.
    """
    m, width = cands.shape
    if m == 0:
        return np.empty(0, dtype=np.int64)
    la = query.shape[0]
    prev = np.tile(np.arange(width + 1, dtype=np.int64), (m, 1))
    for i in range(1, la + 1):
        cur = np.empty_like(prev)
        cur[:, 0] = i
        ci = query[i - 1]
        for j in range(1, width + 1):
            cost = (cands[:, j - 1] != ci).astype(np.int64)
            cur[:, j] = np.minimum(
                np.minimum(prev[:, j] + 1, cur[:, j - 1] + 1),
                prev[:, j - 1] + cost,
            )
        prev = cur
    return prev[np.arange(m), lens]


def _ngram_buckets_numpy(codes: np.ndarray, nmin: int, nmax: int,
                         mask: int) -> np.ndarray:
    """FNV-1a bucket index for every n-gram occurrence, n in [nmin, nmax].

    Occurrences are ordered by n ascending, then position; the numba twin
    follows the same order so downstream counting sees identical arrays.
    """
    n_chars = codes.shape[0]
    mask64 = np.uint64(mask)
    chunks = []
    for n in range(nmin, nmax + 1):
        if n_chars < n:
            break
        windows = np.lib.stride_tricks.sliding_window_view(codes, n)
        h = np.full(windows.shape[0], _FNV_OFFSET, dtype=np.uint64)
        for col in range(n):
            h = (h ^ windows[:, col].astype(np.uint64)) * _FNV_PRIME
        chunks.append((h & mask64).astype(np.int64))
    if not chunks:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(chunks)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

def _build_numba_kernels():
    from numba import njit

    @njit(cache=True)
    def lev_batch(query, cands, lens):  # pragma: no cover - jitted
        m = cands.shape[0]
        la = query.shape[0]
        out = np.empty(m, dtype=np.int64)
        for k in range(m):
            lb = lens[k]
            if la == 0:
                out[k] = lb
                continue
            if lb == 0:
                out[k] = la
                continue
            prev = np.empty(lb + 1, dtype=np.int64)
            cur = np.empty(lb + 1, dtype=np.int64)
            for j in range(lb + 1):
                prev[j] = j
            for i in range(1, la + 1):
                cur[0] = i
                ci = query[i - 1]
                for j in range(1, lb + 1):
                    cost = 0 if cands[k, j - 1] == ci else 1
                    best = prev[j - 1] + cost
                    if prev[j] + 1 < best:
                        best = prev[j] + 1
                    if cur[j - 1] + 1 < best:
                        best = cur[j - 1] + 1
                    cur[j] = best
                tmp = prev
                prev = cur
                cur = tmp
            out[k] = prev[lb]
        return out

    @njit(cache=True)
    def ngram_buckets(codes, nmin, nmax, mask):  # pragma: no cover - jitted
        n_chars = codes.shape[0]
        total = 0
        for n in range(nmin, nmax + 1):
            if n_chars >= n:
                total += n_chars - n + 1
        out = np.empty(total, dtype=np.int64)
        mask64 = np.uint64(mask)
        k = 0
        for n in range(nmin, nmax + 1):
            if n_chars < n:
                break
            for start in range(n_chars - n + 1):
                h = _FNV_OFFSET
                for j in range(start, start + n):
                    h = (h ^ np.uint64(codes[j])) * _FNV_PRIME
                out[k] = np.int64(h & mask64)
                k += 1
        return out

    return lev_batch, ngram_buckets


if _numba_enabled():
    try:
        _lev_batch_impl, _ngram_buckets_impl = _build_numba_kernels()
        _BACKEND = "numba"
    except ImportError:
        _lev_batch_impl, _ngram_buckets_impl = (
            _levenshtein_batch_numpy, _ngram_buckets_numpy)
        _BACKEND = "numpy"
else:
    _lev_batch_impl, _ngram_buckets_impl = (
        _levenshtein_batch_numpy, _ngram_buckets_numpy)
    _BACKEND = "numpy"


def active_backend() -> str:
    """Which kernel implementation this process is using."""
    return _BACKEND


# ---------------------------------------------------------------------------
# public wrappers
# ---------------------------------------------------------------------------

def encode(text: str) -> np.ndarray:
    """Unicode scalar values of `text` as an int32 array."""
    if not text:
        return np.empty(0, dtype=np.int32)
    return np.frombuffer(text.encode("utf-32-le"), dtype=np.uint32).astype(np.int32)


def pad_encode(strings: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    """Encode many strings into one zero-padded matrix plus a length vector."""
    lens = np.array([len(s) for s in strings], dtype=np.int64)
    width = int(lens.max()) if len(strings) else 0
    mat = np.zeros((len(strings), max(width, 1)), dtype=np.int32)
    for row, s in enumerate(strings):
        if s:
            mat[row, :len(s)] = encode(s)
    return mat, lens


def levenshtein_to_many(query: str, cand_matrix: np.ndarray,
                        cand_lens: np.ndarray) -> np.ndarray:
    """Edit distance from `query` to each pre-encoded candidate."""
    return _lev_batch_impl(encode(query), cand_matrix, cand_lens)


def levenshtein(a: str, b: str) -> int:
    """Edit distance between two strings (insert/delete/substitute, cost 1).

    Operates on Unicode scalar values, so astral-plane characters count as
    one symbol each.
    """
    mat, lens = pad_encode([b])
    return int(_lev_batch_impl(encode(a), mat, lens)[0])


def ngram_buckets(text: str, nmin: int, nmax: int, n_buckets: int) -> np.ndarray:
    """Hashed bucket index of every character n-gram occurrence in `text`.

    `n_buckets` must be a power of two; the bucket is the low bits of a
    64-bit FNV-1a hash over the n-gram's code points.
    """
    if n_buckets <= 0 or n_buckets & (n_buckets - 1):
        raise ValueError(f"n_buckets must be a power of two, got {n_buckets}")
    return _ngram_buckets_impl(encode(text), nmin, nmax, n_buckets - 1)
