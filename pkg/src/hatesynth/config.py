"""Pipeline configuration: one INI file, flags override, secrets via env.

Sections map onto the stage configs (``[masking]``, ``[substitution]``,
``[generation]``, ``[features]``, ``[training]``), plus ``[paths]`` for
files, ``[backends]`` for service URLs and token env-var names, and
``[seeds]`` for the global seed. Validation collects every violation
instead of stopping at the first.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .ces import MaskingConfig, SubstitutionConfig
from .classifier import FeatureConfig, TrainConfig
from .errors import ConfigError
from .lm_gen import GenerationConfig


@dataclass
class BackendSettings:
    translation_url: str = ""
    translation_token_env: str = ""
    generation_url: str = ""
    generation_token_env: str = ""
    ner_url: str = ""
    ner_token_env: str = ""
    batch_size: int = 16
    max_attempts: int = 3
    backoff_base: float = 1.0
    concurrency: int = 4


@dataclass
class PipelineConfig:
    paths: dict[str, str] = field(default_factory=dict)
    backends: BackendSettings = field(default_factory=BackendSettings)
    masking: MaskingConfig = field(default_factory=MaskingConfig)
    substitution: SubstitutionConfig = field(default_factory=SubstitutionConfig)
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    rng_seed: Optional[int] = None
    timestamp: Optional[str] = None


def _get(parser, section, key, cast, default):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    if cast is bool:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    return cast(raw)


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    paths = dict(parser.items("paths")) if parser.has_section("paths") else {}

    backends = BackendSettings(
        translation_url=_get(parser, "backends", "translation_url", str, ""),
        translation_token_env=_get(parser, "backends", "translation_token_env", str, ""),
        generation_url=_get(parser, "backends", "generation_url", str, ""),
        generation_token_env=_get(parser, "backends", "generation_token_env", str, ""),
        ner_url=_get(parser, "backends", "ner_url", str, ""),
        ner_token_env=_get(parser, "backends", "ner_token_env", str, ""),
        batch_size=_get(parser, "backends", "batch_size", int, 16),
        max_attempts=_get(parser, "backends", "max_attempts", int, 3),
        backoff_base=_get(parser, "backends", "backoff_base", float, 1.0),
        concurrency=_get(parser, "backends", "concurrency", int, 4),
    )

    rng_seed = _get(parser, "seeds", "global", int, None)

    def seeded(section_default):
        return rng_seed if rng_seed is not None else section_default

    try:
        masking = MaskingConfig(
            threshold=_get(parser, "masking", "threshold", float, 0.75),
            max_ngram=_get(parser, "masking", "max_ngram", int, 3),
            case_fold=_get(parser, "masking", "case_fold", bool, True),
            ner_fallback=_get(parser, "masking", "ner_fallback", str, "off"),
        )
        substitution = SubstitutionConfig(
            replacement_seed=_get(parser, "substitution", "replacement_seed", int, 1),
            rng_seed=_get(parser, "substitution", "rng_seed", int, seeded(0)),
        )
        generation = GenerationConfig(
            shots=_get(parser, "generation", "shots", int, 5),
            repetition_penalty=_get(parser, "generation", "repetition_penalty", float, 2.0),
            max_new_tokens=_get(parser, "generation", "max_new_tokens", int, 100),
            sample=_get(parser, "generation", "sample", bool, True),
            target_group=_get(parser, "generation", "target_group", str, None),
            rng_seed=_get(parser, "generation", "rng_seed", int, seeded(0)),
        )
        features = FeatureConfig(
            ngram_min=_get(parser, "features", "ngram_min", int, 2),
            ngram_max=_get(parser, "features", "ngram_max", int, 4),
            hash_buckets=_get(parser, "features", "hash_buckets", int, 2 ** 18),
            lowercase=_get(parser, "features", "lowercase", bool, True),
        )
        training = TrainConfig(
            epochs=_get(parser, "training", "epochs", int, 10),
            learning_rate=_get(parser, "training", "learning_rate", float, 0.1),
            l2=_get(parser, "training", "l2", float, 1e-4),
            val_fraction=_get(parser, "training", "val_fraction", float, 0.1),
            runs=_get(parser, "training", "runs", int, 3),
            batch_size=_get(parser, "training", "batch_size", int, 32),
            rng_seed=_get(parser, "training", "rng_seed", int, seeded(0)),
        )
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    return PipelineConfig(
        paths=paths, backends=backends, masking=masking,
        substitution=substitution, generation=generation, features=features,
        training=training, rng_seed=rng_seed,
        timestamp=_get(parser, "pipeline", "timestamp", str, None))


def validate_config(config: PipelineConfig) -> list[str]:
    """Every violation found, not just the first."""
    problems = []
    if config.rng_seed is None:
        problems.append("[seeds] global is required; wall-clock seeding is "
                        "not supported")
    for key, value in sorted(config.paths.items()):
        if key == "output_root":
            continue
        if not Path(value).exists():
            problems.append(f"[paths] {key}: file not found: {value}")
    if config.masking.ner_fallback == "external" and not config.backends.ner_url:
        problems.append("[masking] ner_fallback=external requires "
                        "[backends] ner_url")
    return problems


def require_valid(config: PipelineConfig) -> None:
    problems = validate_config(config)
    if problems:
        raise ConfigError(
            f"invalid configuration ({len(problems)} problem(s))",
            violations=problems)
