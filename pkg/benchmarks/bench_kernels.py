"""Benchmark the numba kernels against the pure-numpy fallbacks.

Run:
    python benchmarks/bench_kernels.py

The workloads mirror the two hot paths: every-token-window fuzzy matching
against a gazetteer, and character n-gram hashing during featurization.
Results for both backends come from the same process; the numba path JIT
compiles on the first call, which is excluded by a warmup round.
"""

import time

import numpy as np

from hatesynth import kernels
from hatesynth.kernels import (_build_numba_kernels, _levenshtein_batch_numpy,
                               _ngram_buckets_numpy, encode, pad_encode)


def make_words(rng, n, min_len=3, max_len=12):
    letters = "abcdefghijklmnopqrstuvwxyz"
    return ["".join(letters[i] for i in rng.randint(0, 26,
                                                    rng.randint(min_len,
                                                                max_len + 1)))
            for _ in range(n)]


def bench(label, fn, repeats=5):
    fn()  # warmup (includes JIT compile for the numba path)
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    best = min(times)
    print(f"  {label:<28s} {best * 1000:10.2f} ms")
    return best


def main():
    rng = np.random.RandomState(0)
    try:
        lev_numba, ngram_numba = _build_numba_kernels()
    except ImportError:
        lev_numba = ngram_numba = None
        print("numba unavailable; benchmarking the numpy path only")

    surfaces = make_words(rng, 250)
    windows = make_words(rng, 2000)
    matrix, lens = pad_encode(surfaces)
    encoded_windows = [encode(w) for w in windows]

    print(f"fuzzy matching: {len(windows)} windows x {len(surfaces)} surfaces")

    def run_lev(impl):
        def _run():
            for codes in encoded_windows:
                impl(codes, matrix, lens)
        return _run

    t_np = bench("levenshtein numpy", run_lev(_levenshtein_batch_numpy))
    if lev_numba is not None:
        t_nb = bench("levenshtein numba", run_lev(lev_numba))
        print(f"  speedup: {t_np / t_nb:.1f}x")

    posts = [" ".join(make_words(rng, 20)) for _ in range(500)]
    encoded_posts = [encode(p) for p in posts]
    mask = 2 ** 18 - 1
    print(f"\nn-gram hashing: {len(posts)} posts, n in [2, 4]")

    def run_ngram(impl):
        def _run():
            for codes in encoded_posts:
                impl(codes, 2, 4, mask)
        return _run

    t_np = bench("hashing numpy", run_ngram(_ngram_buckets_numpy))
    if ngram_numba is not None:
        t_nb = bench("hashing numba", run_ngram(ngram_numba))
        print(f"  speedup: {t_np / t_nb:.1f}x")

    print(f"\nactive backend in this process: {kernels.active_backend()}")


if __name__ == "__main__":
    main()
