"""Few-shot prompt construction and the chunk-shuffle generation loop.

Seed posts from the target language are shuffled, partitioned into chunks
of `shots` examples, and each chunk becomes one prompt asking the model for
the next post. When a pass over the data is exhausted, the posts are
reshuffled with a derived seed and the loop continues until enough
generations have been accepted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .backends import GenerationRequest, RetryPolicy, generate_text
from .corpus import HATEFUL, Post
from .errors import (BackendError, ConfigError, EmptyGenerationError,
                     GenerationLoopError)
from .seeding import derived_rng, sha256_text

STOP_CUES = ("Post:", "Target group:")
MIN_GENERATION_TOKENS = 3


@dataclass(frozen=True)
class GenerationConfig:
    shots: int = 5
    repetition_penalty: float = 2.0
    max_new_tokens: int = 100
    sample: bool = True
    target_group: Optional[str] = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.shots < 1:
            raise ConfigError(f"shots must be >= 1, got {self.shots}")


@dataclass(frozen=True)
class PromptRecord:
    prompt_text: str
    example_ids: tuple
    target_group: Optional[str] = None


def build_prompt(examples: Sequence[Post], config: GenerationConfig) -> PromptRecord:
    """Assemble the few-shot prompt with a trailing empty cue.

    Each example becomes one "Post: <text>" line; with a target group every
    line (and the trailing cue) is prefixed "Target group: <g> ".
    """
    if len(examples) != config.shots:
        raise ConfigError(
            f"prompt needs exactly {config.shots} examples, got {len(examples)}")
    langs = {p.lang for p in examples}
    if len(langs) > 1:
        raise ConfigError(f"examples mix languages: {sorted(langs)}")
    non_hateful = [p.id for p in examples if p.label != HATEFUL]
    if non_hateful:
        raise ConfigError(f"examples must be hateful; offending ids: {non_hateful}")
    prefix = f"Target group: {config.target_group} " if config.target_group else ""
    lines = [f"{prefix}Post: {p.text}\n" for p in examples]
    prompt = "".join(lines) + f"{prefix}Post:"
    return PromptRecord(prompt_text=prompt,
                        example_ids=tuple(p.id for p in examples),
                        target_group=config.target_group)


def _normalize(text: str) -> str:
    return " ".join(text.split())


def generate_posts(seed_posts: Sequence[Post], n_required: int, backend,
                   config: GenerationConfig,
                   retry: Optional[RetryPolicy] = None,
                   max_consecutive_rejects: int = 100) -> list[Post]:
    """Generate synthetic posts until n_required are accepted.

    One pass shuffles the seeds, consumes them in chunks of `shots`
    (remainder dropped), and requests one generation per chunk; passes
    repeat with freshly derived shuffles. Generations are trimmed at the
    stop cue and rejected when empty, shorter than three tokens, or exact
    duplicates of a seed or earlier generation.
    """
    if len(seed_posts) < config.shots:
        raise ConfigError(
            f"need at least {config.shots} seed posts, got {len(seed_posts)}")
    if n_required < 1:
        raise ConfigError(f"n_required must be >= 1, got {n_required}")
    seed_norms = {_normalize(p.text) for p in seed_posts}
    lang = seed_posts[0].lang
    accepted: list[Post] = []
    accepted_norms: set[str] = set()
    consecutive_rejects = 0
    pass_idx = 0
    while len(accepted) < n_required:
        order = derived_rng("lm-pass", config.rng_seed, pass_idx).permutation(
            len(seed_posts))
        n_chunks = len(seed_posts) // config.shots
        for chunk_idx in range(n_chunks):
            if len(accepted) >= n_required:
                break
            chunk = [seed_posts[i] for i in
                     order[chunk_idx * config.shots:(chunk_idx + 1) * config.shots]]
            record = build_prompt(chunk, config)
            request = GenerationRequest(
                prompt=record.prompt_text,
                max_new_tokens=config.max_new_tokens,
                repetition_penalty=config.repetition_penalty,
                sample=config.sample,
                stop_sequences=STOP_CUES)
            try:
                result = generate_text(request, backend, retry=retry)
                text = _normalize(result.text)
            except EmptyGenerationError:
                text = ""
            except BackendError as exc:
                raise GenerationLoopError(
                    f"generation backend failed after retries with "
                    f"{len(accepted)}/{n_required} posts accepted: {exc}",
                    partial=accepted) from exc
            rejected = (not text
                        or len(text.split()) < MIN_GENERATION_TOKENS
                        or text in seed_norms
                        or text in accepted_norms)
            if rejected:
                consecutive_rejects += 1
                if consecutive_rejects >= max_consecutive_rejects:
                    raise GenerationLoopError(
                        f"{consecutive_rejects} consecutive rejections; "
                        f"accepted {len(accepted)}/{n_required}",
                        partial=accepted)
                continue
            consecutive_rejects = 0
            accepted_norms.add(text)
            accepted.append(Post(
                id=f"lm-{len(accepted):05d}",
                text=text,
                label=HATEFUL,
                lang=lang,
                source="lm",
                method="lm",
                lineage={
                    "example_ids": list(record.example_ids),
                    "prompt_digest": sha256_text(record.prompt_text)[:16],
                }))
        pass_idx += 1
    return accepted
