"""Word-level Shapley attribution and the entity-share metric.

The value function is the model's P(hateful) on a post with a subset of
its words retained. Shapley values are estimated by Monte Carlo
permutation sampling with antithetic pairs: each sampled permutation is
walked once forward and once reversed, accumulating every word's marginal
contribution. All prefix texts of a permutation are scored in batches, so
one permutation costs one batched forward pass.
"""

from __future__ import annotations

import numpy as np

from . import HarnessError
from .data import load_corpus, load_entity_surfaces
from .model import ModelBundle


def _prefix_values(bundle: ModelBundle, words, order) -> np.ndarray:
    """v(prefix_0), v(prefix_1), ..., v(all words) along one permutation."""
    texts = []
    kept: list[str] = []
    present = [False] * len(words)
    texts.append("")
    for idx in order:
        present[idx] = True
        kept = [w for i, w in enumerate(words) if present[i]]
        texts.append(" ".join(kept))
    return bundle.predict_proba(texts)


def word_shapley(bundle: ModelBundle, text: str, n_permutations: int = 8,
                 seed: int = 0) -> dict[str, float]:
    """Estimated Shapley value per distinct word of one post.

    A word appearing several times gets the mean of its occurrences'
    values. `n_permutations` counts antithetic pairs, so the number of
    sampled orders is 2x that.
    """
    words = text.split()
    if not words:
        return {}
    rng = np.random.RandomState(seed)
    contrib = np.zeros(len(words))
    n_orders = 0
    for _ in range(n_permutations):
        forward = rng.permutation(len(words))
        for order in (forward, forward[::-1]):
            values = _prefix_values(bundle, words, order)
            deltas = np.diff(values)
            for pos, idx in enumerate(order):
                contrib[idx] += deltas[pos]
            n_orders += 1
    contrib /= n_orders
    by_word: dict[str, list[float]] = {}
    for word, value in zip(words, contrib):
        by_word.setdefault(word, []).append(float(value))
    return {w: sum(v) / len(v) for w, v in by_word.items()}


def shap_entity_share(bundle: ModelBundle, test_file, entity_table_file,
                      k: int = 20, n_permutations: int = 8,
                      seed: int = 0) -> dict:
    """Mean Shapley value per word over the test set; entity share of top-k.

    Words are ranked by absolute mean value (ties lexicographic); the
    entity share is the fraction of the top-k that case-folds to a surface
    in the entity table.
    """
    records = load_corpus(test_file)
    if not records:
        raise HarnessError(f"empty test file: {test_file}")
    surfaces = load_entity_surfaces(entity_table_file)
    totals: dict[str, float] = {}
    counts: dict[str, int] = {}
    for i, record in enumerate(records):
        values = word_shapley(bundle, record["text"], n_permutations,
                              seed=seed + i)
        for word, value in values.items():
            totals[word] = totals.get(word, 0.0) + value
            counts[word] = counts.get(word, 0) + 1
    means = {w: totals[w] / counts[w] for w in totals}
    ranked = sorted(means.items(), key=lambda kv: (-abs(kv[1]), kv[0]))
    top = ranked[:k]
    hits = sum(1 for word, _ in top if word.casefold() in surfaces)
    share = hits / len(top) if top else 0.0
    return {"top_words": [{"word": w, "mean_shap": v} for w, v in top],
            "entity_share": share}
