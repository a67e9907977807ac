"""Incremental augmentation arms: schedule construction and materialization.

A schedule holds one base arm (all-original baseline) plus, per increment,
an all-original control and one arm per synthesis method. Non-hateful
posts stay constant at 450 per arm; original posts are held fixed across
the synthetic arms of a schedule (prefix-nested sampling), so every arm
differs from the baseline only in what was added.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from . import __version__
from .corpus import (Dataset, HATEFUL, NON_HATEFUL, corpus_bytes, load_corpus,
                     save_corpus)
from .errors import ConfigError, DataError, PoolUnderflowError
from .seeding import derive_seed, derived_rng, sha256_bytes, sha256_file

METHODS = ("mt", "ces", "lm")
ALL_ORIG = "all_orig"


@dataclass(frozen=True)
class ArmSpec:
    arm_id: str
    method: str  # all_orig | mt | ces | lm
    original_hateful: int
    synthetic_hateful: int
    non_hateful: int = 450
    rng_seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS + (ALL_ORIG,):
            raise ConfigError(f"unknown arm method {self.method!r}")
        if self.method == ALL_ORIG and self.synthetic_hateful != 0:
            raise ConfigError(
                f"arm {self.arm_id}: all-original arms take no synthetic posts")
        if min(self.original_hateful, self.synthetic_hateful,
               self.non_hateful) < 0:
            raise ConfigError(f"arm {self.arm_id}: negative counts")


def build_schedule(max_total_hateful: int = 450, step: int = 50,
                   baseline_original: int = 100, rng_seed: int = 0,
                   non_hateful: int = 450) -> list[ArmSpec]:
    """Emit the base arm plus per-increment all-original and method arms.

    Increment k adds k*step posts: the all-original control grows to
    baseline+k*step originals, while each method arm keeps the baseline
    originals and adds k*step synthetic posts.
    """
    if step <= 0:
        raise ConfigError(f"step must be > 0, got {step}")
    if baseline_original > max_total_hateful:
        raise ConfigError(
            f"baseline_original {baseline_original} exceeds max_total_hateful "
            f"{max_total_hateful}")
    if baseline_original == 0:
        warnings.warn("baseline arm has zero hateful posts; the base model "
                      "will train on a single class", stacklevel=2)
    arms = [ArmSpec("base", ALL_ORIG, baseline_original, 0,
                    non_hateful=non_hateful, rng_seed=rng_seed)]
    k = 1
    while baseline_original + k * step <= max_total_hateful:
        arms.append(ArmSpec(f"step{k}-all_orig", ALL_ORIG,
                            baseline_original + k * step, 0,
                            non_hateful=non_hateful, rng_seed=rng_seed))
        for method in METHODS:
            arms.append(ArmSpec(f"step{k}-{method}", method,
                                baseline_original, k * step,
                                non_hateful=non_hateful, rng_seed=rng_seed))
        k += 1
    return arms


def _take(dataset: Dataset, n: int, seed: int, pool_name: str) -> list:
    if n > len(dataset.posts):
        raise PoolUnderflowError(
            f"{pool_name}: need {n}, have {len(dataset.posts)}")
    order = derived_rng("materialize", pool_name, seed).permutation(
        len(dataset.posts))
    return [dataset.posts[i] for i in order[:n]]


def _require_label(posts, label: str, pool_name: str) -> None:
    bad = [p.id for p in posts if p.label != label]
    if bad:
        raise DataError(
            f"pool {pool_name} must contain only {label} posts; offending "
            f"ids: {bad[:5]}")


def _resolve_timestamp(timestamp: Optional[str]) -> str:
    if timestamp is not None:
        return timestamp
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        return datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat()
    return datetime.now(tz=timezone.utc).isoformat()


def materialize(arm: ArmSpec, pools: dict, out_dir,
                timestamp: Optional[str] = None) -> tuple[Path, dict]:
    """Sample the arm's pools, write train.jsonl, and record a manifest.

    `pools` maps "non_hateful" and "original_hateful" to datasets and
    "synthetic" to a per-method dataset dict. Original and non-hateful
    draws depend only on the schedule seed (and are prefix-nested), so the
    baseline posts are identical across every arm of a schedule. Pass a
    fixed `timestamp` (or set SOURCE_DATE_EPOCH) for byte-reproducible
    manifests; the default is the current UTC time.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    non_hateful_pool: Dataset = pools["non_hateful"]
    original_pool: Dataset = pools["original_hateful"]
    synthetic_pools: dict[str, Dataset] = pools.get("synthetic", {})

    _require_label(non_hateful_pool.posts, NON_HATEFUL, "non_hateful")
    _require_label(original_pool.posts, HATEFUL, "original_hateful")
    nh = _take(non_hateful_pool, arm.non_hateful,
               derive_pool_seed(arm.rng_seed, "non_hateful"), "non_hateful")
    orig = _take(original_pool, arm.original_hateful,
                 derive_pool_seed(arm.rng_seed, "original_hateful"),
                 "original_hateful")
    synth = []
    if arm.synthetic_hateful:
        pool = synthetic_pools.get(arm.method)
        if pool is None:
            raise PoolUnderflowError(
                f"synthetic/{arm.method}: need {arm.synthetic_hateful}, have 0")
        _require_label(pool.posts, HATEFUL, f"synthetic/{arm.method}")
        synth = _take(pool, arm.synthetic_hateful,
                      derive_pool_seed(arm.rng_seed, "synthetic", arm.arm_id),
                      f"synthetic/{arm.method}")

    combined = nh + orig + synth
    order = derived_rng("materialize", "shuffle", arm.rng_seed,
                        arm.arm_id).permutation(len(combined))
    train = Dataset([combined[i] for i in order])

    train_path = out_dir / "train.jsonl"
    save_corpus(train, train_path)

    written = load_corpus(train_path)
    counts = written.counts
    by_method: dict[str, int] = {}
    for post in written.posts:
        by_method[post.method] = by_method.get(post.method, 0) + 1

    manifest = {
        "arm": asdict(arm),
        "sources": {
            "non_hateful": _pool_digest(non_hateful_pool),
            "original_hateful": _pool_digest(original_pool),
            **{f"synthetic/{m}": _pool_digest(d)
               for m, d in sorted(synthetic_pools.items())},
        },
        "output": {
            "path": train_path.name,
            "sha256": sha256_file(train_path),
            "counts": {"non_hateful": counts.non_hateful,
                       "hateful": counts.hateful},
            "by_method": dict(sorted(by_method.items())),
        },
        "tool_version": f"hatesynth {__version__}",
        "timestamp": _resolve_timestamp(timestamp),
    }
    manifest_path = out_dir / "manifest.json"
    with manifest_path.open("w", encoding="utf-8") as fh:
        json.dump(manifest, fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    return train_path, manifest


def derive_pool_seed(schedule_seed: int, *parts) -> int:
    return derive_seed("pool", schedule_seed, *parts)


def _pool_digest(dataset: Dataset) -> dict:
    return {"count": len(dataset.posts),
            "sha256": sha256_bytes(corpus_bytes(dataset))}


def verify_manifest(out_dir) -> list[str]:
    """Recount and re-digest a materialized arm; return any mismatches."""
    out_dir = Path(out_dir)
    with (out_dir / "manifest.json").open(encoding="utf-8") as fh:
        manifest = json.load(fh)
    problems = []
    train_path = out_dir / manifest["output"]["path"]
    if not train_path.exists():
        return [f"missing output file {train_path}"]
    digest = sha256_file(train_path)
    if digest != manifest["output"]["sha256"]:
        problems.append(f"digest mismatch for {train_path}")
    written = load_corpus(train_path)
    counts = written.counts
    recorded = manifest["output"]["counts"]
    if (counts.non_hateful != recorded["non_hateful"]
            or counts.hateful != recorded["hateful"]):
        problems.append(
            f"count mismatch: file has {counts}, manifest says {recorded}")
    return problems
