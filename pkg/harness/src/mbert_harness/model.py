"""BERT fine-tuning with the reference hyperparameters.

Encoder embeddings (768-dim for multilingual BERT) pass through a dropout
layer into a linear 2-class head; training uses cross-entropy with Adam,
no weight decay, gradient clipping at 1.0, 10 epochs, batch size 16, and
a seeded 90/10 train/validation split. Reported numbers average three
independently seeded runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import torch
from torch import nn

from . import HarnessError
from .data import HATEFUL, LABELS, NON_HATEFUL, labels_to_ids, load_corpus

DEFAULT_MODEL = "bert-base-multilingual-cased"


@dataclass(frozen=True)
class HarnessConfig:
    batch_size: int = 16
    learning_rate: float = 1e-5
    weight_decay: float = 0.0
    grad_clip: float = 1.0
    epochs: int = 10
    dropout: float = 0.1
    head_out: int = 2  # linear head: encoder hidden size (768) -> 2
    val_fraction: float = 0.1
    runs: int = 3
    seed: int = 0
    max_length: int = 128
    model_name: str = DEFAULT_MODEL


class TextClassifier(nn.Module):
    def __init__(self, encoder, dropout: float, n_classes: int = 2):
        super().__init__()
        self.encoder = encoder
        self.dropout = nn.Dropout(dropout)
        self.head = nn.Linear(encoder.config.hidden_size, n_classes)

    def forward(self, input_ids, attention_mask):
        out = self.encoder(input_ids=input_ids, attention_mask=attention_mask)
        pooled = getattr(out, "pooler_output", None)
        if pooled is None:
            pooled = out.last_hidden_state[:, 0]
        return self.head(self.dropout(pooled))


@dataclass
class ModelBundle:
    model: TextClassifier
    tokenizer: object
    config: HarnessConfig

    @torch.no_grad()
    def predict_proba(self, texts) -> np.ndarray:
        """P(hateful) per text."""
        self.model.eval()
        probs = []
        for start in range(0, len(texts), self.config.batch_size):
            batch = list(texts[start:start + self.config.batch_size])
            enc = self.tokenizer(batch, padding=True, truncation=True,
                                 max_length=self.config.max_length,
                                 return_tensors="pt")
            logits = self.model(enc["input_ids"], enc["attention_mask"])
            probs.append(torch.softmax(logits, dim=-1)[:, 1].numpy())
        return np.concatenate(probs) if probs else np.empty(0)

    def predict(self, texts) -> list[str]:
        return [HATEFUL if p > 0.5 else NON_HATEFUL
                for p in self.predict_proba(texts)]


def _load_pretrained(model_name: str):
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(model_name)
        encoder = AutoModel.from_pretrained(model_name)
    except Exception as exc:
        raise HarnessError(
            f"could not load model {model_name!r}: {exc}. Pass a local "
            f"checkout via --model when the hub is unreachable.") from exc
    return tokenizer, encoder


def macro_f1(predictions, gold) -> float:
    scores = per_class_f1(predictions, gold)
    return sum(scores[label] for label in LABELS) / len(LABELS)


def per_class_f1(predictions, gold) -> dict[str, float]:
    if len(predictions) != len(gold) or not gold:
        raise HarnessError("prediction/gold length mismatch or empty")
    out = {}
    for label in LABELS:
        tp = sum(1 for p, g in zip(predictions, gold) if p == label == g)
        fp = sum(1 for p, g in zip(predictions, gold) if p == label != g)
        fn = sum(1 for p, g in zip(predictions, gold) if g == label != p)
        denom = 2 * tp + fp + fn
        out[label] = (2 * tp / denom) if denom else 0.0
    return out


def _train_one(texts, labels, config: HarnessConfig, seed: int) -> ModelBundle:
    torch.manual_seed(seed)
    tokenizer, encoder = _load_pretrained(config.model_name)
    model = TextClassifier(encoder, config.dropout, config.head_out)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate,
                                 weight_decay=config.weight_decay)
    loss_fn = nn.CrossEntropyLoss()

    order = np.random.RandomState(seed).permutation(len(texts))
    n_val = max(1, int(round(len(texts) * config.val_fraction)))
    val_idx, train_idx = order[:n_val], order[n_val:]
    y = np.array(labels)

    try:
        for epoch in range(config.epochs):
            model.train()
            epoch_order = np.random.RandomState(
                seed * 1000003 + epoch).permutation(len(train_idx))
            for start in range(0, len(epoch_order), config.batch_size):
                batch_idx = train_idx[epoch_order[start:start + config.batch_size]]
                batch = [texts[i] for i in batch_idx]
                enc = tokenizer(batch, padding=True, truncation=True,
                                max_length=config.max_length,
                                return_tensors="pt")
                logits = model(enc["input_ids"], enc["attention_mask"])
                loss = loss_fn(logits, torch.as_tensor(y[batch_idx]))
                optimizer.zero_grad()
                loss.backward()
                nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
                optimizer.step()
    except RuntimeError as exc:
        if "out of memory" in str(exc).lower():
            raise HarnessError(
                f"hardware insufficient for model {config.model_name!r} at "
                f"batch size {config.batch_size}: {exc}") from exc
        raise
    return ModelBundle(model=model, tokenizer=tokenizer, config=config)


def finetune_eval(train_file, test_file, config: HarnessConfig,
                  save_model_dir=None) -> dict:
    """Fine-tune per config, average macro F1 over seeded runs.

    The report schema matches the pipeline's `eval` output:
    {"macro_f1_runs": [...], "mean": ..., "per_class": {...}}.
    """
    train_records = load_corpus(train_file)
    test_records = load_corpus(test_file)
    if not train_records or not test_records:
        raise HarnessError("train and test files must be non-empty")
    labels = labels_to_ids(train_records)
    if len(set(labels)) < 2:
        raise HarnessError("training file must contain both classes")
    texts = [r["text"] for r in train_records]
    test_texts = [r["text"] for r in test_records]
    gold = [r["label"] for r in test_records]

    runs = []
    per_class_runs = []
    last_bundle = None
    for run_idx in range(config.runs):
        bundle = _train_one(texts, labels, config, seed=config.seed + run_idx)
        predictions = bundle.predict(test_texts)
        runs.append(macro_f1(predictions, gold))
        per_class_runs.append(per_class_f1(predictions, gold))
        last_bundle = bundle
    per_class = {label: sum(r[label] for r in per_class_runs) / len(per_class_runs)
                 for label in LABELS}
    report = {"macro_f1_runs": runs,
              "mean": sum(runs) / len(runs),
              "per_class": per_class}
    if save_model_dir is not None and last_bundle is not None:
        save_bundle(last_bundle, save_model_dir)
    return report


def save_bundle(bundle: ModelBundle, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bundle.tokenizer.save_pretrained(out_dir / "tokenizer")
    bundle.model.encoder.save_pretrained(out_dir / "encoder")
    torch.save({"head": bundle.model.head.state_dict(),
                "dropout": bundle.config.dropout,
                "head_out": bundle.config.head_out},
               out_dir / "head.pt")
    with (out_dir / "config.json").open("w", encoding="utf-8") as fh:
        json.dump({"max_length": bundle.config.max_length,
                   "batch_size": bundle.config.batch_size}, fh)


def load_bundle(model_dir) -> ModelBundle:
    from transformers import AutoModel, AutoTokenizer

    model_dir = Path(model_dir)
    if not (model_dir / "head.pt").exists():
        raise HarnessError(f"no saved harness model under {model_dir}")
    tokenizer = AutoTokenizer.from_pretrained(model_dir / "tokenizer")
    encoder = AutoModel.from_pretrained(model_dir / "encoder")
    extra = torch.load(model_dir / "head.pt", weights_only=True)
    with (model_dir / "config.json").open(encoding="utf-8") as fh:
        saved = json.load(fh)
    config = replace(HarnessConfig(), dropout=extra["dropout"],
                     head_out=extra["head_out"],
                     max_length=saved["max_length"],
                     batch_size=saved["batch_size"],
                     model_name=str(model_dir))
    model = TextClassifier(encoder, config.dropout, config.head_out)
    model.head.load_state_dict(extra["head"])
    return ModelBundle(model=model, tokenizer=tokenizer, config=config)
