"""Hashed character n-gram logistic regression with linear attribution.

A deliberately small, dependency-light classifier for desk-scale
experiments: character n-grams are script-agnostic (Devanagari, Vietnamese
diacritics, Latin all work without a tokenizer), the hashed feature space
keeps memory bounded, and for a linear model the per-token additive
contribution used in the attribution report is exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import sparse

from . import kernels
from .corpus import HATEFUL, LABELS, NON_HATEFUL, Dataset
from .entity_table import EntityTable
from .errors import ConfigError, DataError
from .seeding import derived_rng


@dataclass(frozen=True)
class FeatureConfig:
    ngram_min: int = 2
    ngram_max: int = 4
    hash_buckets: int = 2 ** 18
    lowercase: bool = True

    def __post_init__(self):
        if self.ngram_min > self.ngram_max:
            raise ConfigError(
                f"ngram_min {self.ngram_min} > ngram_max {self.ngram_max}")
        if self.hash_buckets <= 0 or self.hash_buckets & (self.hash_buckets - 1):
            raise ConfigError(
                f"hash_buckets must be a power of two, got {self.hash_buckets}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    learning_rate: float = 0.1
    l2: float = 1e-4
    val_fraction: float = 0.1
    runs: int = 3
    batch_size: int = 32
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 < self.val_fraction < 1:
            raise ConfigError(
                f"val_fraction must be in (0, 1), got {self.val_fraction}")
        if self.runs < 1:
            raise ConfigError(f"runs must be >= 1, got {self.runs}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")


class SparseVector(NamedTuple):
    indices: np.ndarray  # sorted bucket ids
    values: np.ndarray   # L2-normalized counts
    size: int


def featurize(text: str, config: FeatureConfig) -> SparseVector:
    """Hashed, L2-normalized character n-gram counts."""
    if config.lowercase:
        text = text.lower()
    buckets = kernels.ngram_buckets(text, config.ngram_min, config.ngram_max,
                                    config.hash_buckets)
    if buckets.size == 0:
        return SparseVector(np.empty(0, dtype=np.int64),
                            np.empty(0, dtype=np.float64), config.hash_buckets)
    indices, counts = np.unique(buckets, return_counts=True)
    values = counts.astype(np.float64)
    values /= np.linalg.norm(values)
    return SparseVector(indices, values, config.hash_buckets)


def featurize_matrix(texts: Sequence[str], config: FeatureConfig) -> sparse.csr_matrix:
    indptr = [0]
    indices = []
    data = []
    for text in texts:
        vec = featurize(text, config)
        indices.append(vec.indices)
        data.append(vec.values)
        indptr.append(indptr[-1] + len(vec.indices))
    if not texts:
        return sparse.csr_matrix((0, config.hash_buckets))
    return sparse.csr_matrix(
        (np.concatenate(data) if data else np.empty(0),
         np.concatenate(indices) if indices else np.empty(0, dtype=np.int64),
         np.array(indptr)),
        shape=(len(texts), config.hash_buckets))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss(w: np.ndarray, b: float, X: sparse.csr_matrix,
                  y: np.ndarray, l2: float) -> float:
    """Mean log-loss plus L2 penalty; stable for large |z|."""
    z = X @ w + b
    # log(1 + e^z) - y*z without overflow
    per_example = np.logaddexp(0.0, z) - y * z
    return float(per_example.mean() + 0.5 * l2 * (w @ w))


def logistic_grad(w: np.ndarray, b: float, X: sparse.csr_matrix,
                  y: np.ndarray, l2: float) -> tuple[np.ndarray, float]:
    z = X @ w + b
    r = _sigmoid(z) - y
    grad_w = (X.T @ r) / X.shape[0] + l2 * w
    grad_b = float(r.mean())
    return grad_w, grad_b


@dataclass
class Model:
    weights: np.ndarray
    bias: float
    fcfg: FeatureConfig
    tcfg: TrainConfig
    val_losses: list[float] = field(default_factory=list)

    def decision(self, texts: Sequence[str]) -> np.ndarray:
        X = featurize_matrix(texts, self.fcfg)
        return X @ self.weights + self.bias

    def predict(self, texts: Sequence[str]) -> list[str]:
        return [HATEFUL if z > 0 else NON_HATEFUL for z in self.decision(texts)]


def train(dataset: Dataset, fcfg: FeatureConfig, tcfg: TrainConfig) -> Model:
    """Mini-batch gradient descent on the 90% split; deterministic per seed."""
    labels = {p.label for p in dataset.posts}
    if len(labels) < 2:
        raise DataError(
            f"training needs both classes, dataset has only {sorted(labels)}")
    texts = [p.text for p in dataset.posts]
    y = np.array([1.0 if p.label == HATEFUL else 0.0 for p in dataset.posts])
    X = featurize_matrix(texts, fcfg)
    n = len(texts)

    split_order = derived_rng("train-split", tcfg.rng_seed).permutation(n)
    n_val = max(1, int(round(n * tcfg.val_fraction)))
    val_idx = split_order[:n_val]
    train_idx = split_order[n_val:]
    X_train, y_train = X[train_idx], y[train_idx]
    X_val, y_val = X[val_idx], y[val_idx]

    w = np.zeros(fcfg.hash_buckets)
    b = 0.0
    val_losses = []
    for epoch in range(tcfg.epochs):
        order = derived_rng("train-epoch", tcfg.rng_seed, epoch).permutation(
            len(train_idx))
        for start in range(0, len(order), tcfg.batch_size):
            batch = order[start:start + tcfg.batch_size]
            grad_w, grad_b = logistic_grad(w, b, X_train[batch], y_train[batch],
                                           tcfg.l2)
            w -= tcfg.learning_rate * grad_w
            b -= tcfg.learning_rate * grad_b
        val_losses.append(logistic_loss(w, b, X_val, y_val, tcfg.l2))
    return Model(weights=w, bias=b, fcfg=fcfg, tcfg=tcfg, val_losses=val_losses)


def macro_f1(predictions: Sequence[str], gold: Sequence[str]) -> float:
    """Unweighted mean of per-class F1 over both label classes.

    A class absent from both gold and predictions contributes F1 = 0.
    """
    per_class = per_class_f1(predictions, gold)
    return sum(per_class[label] for label in LABELS) / len(LABELS)


def per_class_f1(predictions: Sequence[str], gold: Sequence[str]) -> dict[str, float]:
    if len(predictions) != len(gold):
        raise DataError(
            f"length mismatch: {len(predictions)} predictions vs "
            f"{len(gold)} gold labels")
    if not gold:
        raise DataError("cannot score empty label lists")
    scores = {}
    for label in LABELS:
        tp = sum(1 for p, g in zip(predictions, gold) if p == label and g == label)
        fp = sum(1 for p, g in zip(predictions, gold) if p == label and g != label)
        fn = sum(1 for p, g in zip(predictions, gold) if p != label and g == label)
        denom = 2 * tp + fp + fn
        scores[label] = (2 * tp / denom) if denom else 0.0
    return scores


@dataclass
class AttributionReport:
    top_tokens: list[tuple[str, float]]
    entity_share: float


def attribute(model: Model, test_set: Dataset, target_table: EntityTable,
              k: int = 20) -> AttributionReport:
    """Rank tokens by mean additive contribution; report the entity share.

    A token's contribution within a post is the sum over its character
    n-gram occurrences of weight x that feature's value in the post vector;
    the mean is taken over all test posts containing the token. Tokens are
    ranked by absolute mean contribution (ties broken lexicographically),
    and entity_share is the fraction of the top-k that exactly matches a
    table surface after case folding.
    """
    if not test_set.posts:
        raise DataError("attribution needs a non-empty test set")
    fcfg = model.fcfg
    totals: dict[str, float] = {}
    post_counts: dict[str, int] = {}
    for post in test_set.posts:
        text = post.text.lower() if fcfg.lowercase else post.text
        vec = featurize(text, fcfg)
        value_of = dict(zip(vec.indices.tolist(), vec.values.tolist()))
        for token in dict.fromkeys(text.split()):
            buckets = kernels.ngram_buckets(token, fcfg.ngram_min,
                                            fcfg.ngram_max, fcfg.hash_buckets)
            contrib = 0.0
            for bucket in buckets.tolist():
                value = value_of.get(bucket)
                if value is not None:
                    contrib += model.weights[bucket] * value
            totals[token] = totals.get(token, 0.0) + contrib
            post_counts[token] = post_counts.get(token, 0) + 1
    means = {t: totals[t] / post_counts[t] for t in totals}
    ranked = sorted(means.items(), key=lambda kv: (-abs(kv[1]), kv[0]))
    top = ranked[:k]
    surfaces = {s.casefold() for _, s in target_table.all_surfaces()}
    hits = sum(1 for token, _ in top if token.casefold() in surfaces)
    share = hits / len(top) if top else 0.0
    return AttributionReport(top_tokens=top, entity_share=share)


def evaluate(train_set: Dataset, test_set: Dataset, fcfg: FeatureConfig,
             tcfg: TrainConfig) -> dict:
    """Train `runs` seeded models and average macro F1 on the test set."""
    gold = [p.label for p in test_set.posts]
    texts = [p.text for p in test_set.posts]
    runs = []
    per_class_runs = []
    for run_idx in range(tcfg.runs):
        run_cfg = replace(tcfg, rng_seed=tcfg.rng_seed + run_idx)
        model = train(train_set, fcfg, run_cfg)
        predictions = model.predict(texts)
        runs.append(macro_f1(predictions, gold))
        per_class_runs.append(per_class_f1(predictions, gold))
    per_class = {label: sum(r[label] for r in per_class_runs) / len(per_class_runs)
                 for label in LABELS}
    return {"macro_f1_runs": runs,
            "mean": sum(runs) / len(runs),
            "per_class": per_class}


# ---------------------------------------------------------------------------
# model IO
# ---------------------------------------------------------------------------

MODEL_FORMAT_VERSION = 1


def save_model(model: Model, path) -> None:
    nz = np.nonzero(model.weights)[0]
    record = {
        "format_version": MODEL_FORMAT_VERSION,
        "fcfg": {"ngram_min": model.fcfg.ngram_min,
                 "ngram_max": model.fcfg.ngram_max,
                 "hash_buckets": model.fcfg.hash_buckets,
                 "lowercase": model.fcfg.lowercase},
        "tcfg": {"epochs": model.tcfg.epochs,
                 "learning_rate": model.tcfg.learning_rate,
                 "l2": model.tcfg.l2,
                 "val_fraction": model.tcfg.val_fraction,
                 "runs": model.tcfg.runs,
                 "batch_size": model.tcfg.batch_size,
                 "rng_seed": model.tcfg.rng_seed},
        "weights": {"indices": nz.tolist(),
                    "values": model.weights[nz].tolist()},
        "bias": model.bias,
        "val_losses": model.val_losses,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        json.dump(record, fh, ensure_ascii=False)
        fh.write("\n")


def load_model(path) -> Model:
    path = Path(path)
    if not path.exists():
        raise DataError(f"model file not found: {path}")
    with path.open(encoding="utf-8") as fh:
        record = json.load(fh)
    if record.get("format_version") != MODEL_FORMAT_VERSION:
        raise DataError(
            f"unsupported model format {record.get('format_version')!r}")
    fcfg = FeatureConfig(**record["fcfg"])
    tcfg = TrainConfig(**record["tcfg"])
    weights = np.zeros(fcfg.hash_buckets)
    weights[np.array(record["weights"]["indices"], dtype=np.int64)] = \
        np.array(record["weights"]["values"])
    return Model(weights=weights, bias=float(record["bias"]), fcfg=fcfg,
                 tcfg=tcfg, val_losses=list(record.get("val_losses", [])))
