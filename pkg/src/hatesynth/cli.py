"""Command-line entry point wiring every pipeline stage.

Exit codes: 0 success, 2 configuration error, 3 backend error, 4 data
error. Failures print a machine-readable JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import __version__, backends, ces, classifier, corpus, entity_table
from . import experiment, lm_gen
from .config import PipelineConfig, load_config, require_valid, validate_config
from .errors import (BackendError, ConfigError, DataError, HatesynthError)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_DATA = 4


def _fail(kind: str, message: str, details=None, code: int = EXIT_DATA) -> int:
    payload = {"error": {"kind": kind, "message": message}}
    if details:
        payload["error"]["details"] = list(details)
    print(json.dumps(payload, ensure_ascii=False), file=sys.stderr)
    return code


def _load_pipeline_config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return PipelineConfig()


def _retry_policy(cfg: PipelineConfig) -> backends.RetryPolicy:
    return backends.RetryPolicy(max_attempts=cfg.backends.max_attempts,
                                backoff_base=cfg.backends.backoff_base)


def _translation_backend(args, cfg: PipelineConfig):
    if args.backend == "mock":
        return backends.MockTranslationBackend(token_prefix=args.mock_prefix)
    url = args.url or cfg.backends.translation_url
    if not url:
        raise ConfigError("http translation backend needs --url or "
                          "[backends] translation_url")
    return backends.HttpTranslationBackend(
        url, token_env=args.token_env or cfg.backends.translation_token_env)


def _generation_backend(args, cfg: PipelineConfig):
    if args.backend == "mock":
        if args.responses:
            return backends.MockGenerationBackend.from_json(args.responses)
        return backends.MockGenerationBackend()
    url = args.url or cfg.backends.generation_url
    if not url:
        raise ConfigError("http generation backend needs --url or "
                          "[backends] generation_url")
    return backends.HttpGenerationBackend(
        url, token_env=args.token_env or cfg.backends.generation_token_env)


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------

def cmd_preprocess(args) -> int:
    dataset = corpus.load_corpus(args.infile, expected_lang=args.lang)
    cleaned = corpus.preprocess_dataset(dataset)
    corpus.save_corpus(cleaned, args.outfile)
    counts = cleaned.counts
    print(f"kept {len(cleaned)}/{len(dataset)} posts "
          f"(non_hateful={counts.non_hateful}, hateful={counts.hateful}) "
          f"-> {args.outfile}")
    return EXIT_OK


def _resolve_table(path_arg, lang_arg):
    if path_arg:
        return entity_table.load_entity_table(path_arg)
    if lang_arg:
        return entity_table.load_entity_table(
            entity_table.builtin_table_path(lang_arg))
    raise ConfigError("give --table PATH or --lang TAG")


def cmd_table_stats(args) -> int:
    table = _resolve_table(args.table, args.lang)
    stats = entity_table.table_stats(table)
    print(",".join(f"{cat}={stats[cat]}" for cat in entity_table.CATEGORIES))
    return EXIT_OK


def cmd_table_validate(args) -> int:
    source = entity_table.load_entity_table(args.source)
    target = entity_table.load_entity_table(args.target)
    report = entity_table.validate_pair(source, target)
    for warning in report.warnings:
        print(f"warning: {warning}")
    for error in report.errors:
        print(f"error: {error}")
    if not report.ok:
        return _fail("data", "entity table pair failed validation",
                     details=report.errors, code=EXIT_DATA)
    print("ok" if report.empty else f"ok with {len(report.warnings)} warning(s)")
    return EXIT_OK


def cmd_mask(args) -> int:
    cfg = _load_pipeline_config(args)
    masking = cfg.masking
    if args.threshold is not None:
        masking = replace(masking, threshold=args.threshold)
    if args.max_ngram is not None:
        masking = replace(masking, max_ngram=args.max_ngram)
    table = entity_table.load_entity_table(args.table)
    dataset = corpus.load_corpus(args.infile)
    masked = ces.mask_corpus(dataset.posts, table, masking)
    if args.only_masked:
        masked = [m for m in masked if m.spans]
    ces.save_masked(masked, args.outfile)
    n_spans = sum(len(m.spans) for m in masked)
    print(f"masked {len(masked)} posts, {n_spans} spans -> {args.outfile}")
    return EXIT_OK


def cmd_translate(args) -> int:
    cfg = _load_pipeline_config(args)
    backend = _translation_backend(args, cfg)
    retry = _retry_policy(cfg)
    if args.kind == "masked":
        posts = ces.load_masked(args.infile)
        survivors, audits = backends.translate_masked(
            posts, backend, args.from_lang, args.to_lang,
            batch_size=args.batch_size or cfg.backends.batch_size,
            retry=retry, concurrency=cfg.backends.concurrency)
        ces.save_masked(survivors, args.outfile)
        if args.audit:
            backends.save_audits(audits, args.audit)
        dropped = sum(1 for a in audits if a.verdict == backends.VERDICT_DROPPED)
        repaired = sum(1 for a in audits if a.verdict == backends.VERDICT_REPAIRED)
        print(f"translated {len(posts)} masked posts: "
              f"{len(survivors)} kept ({repaired} repaired), {dropped} dropped "
              f"-> {args.outfile}")
    else:
        dataset = corpus.load_corpus(args.infile)
        texts, _ = backends.translate_batch(
            dataset.posts, backend, args.from_lang, args.to_lang,
            batch_size=args.batch_size or cfg.backends.batch_size,
            retry=retry, concurrency=cfg.backends.concurrency)
        translated = corpus.Dataset([
            replace(post, id=f"{post.id}-mt", text=text, lang=args.to_lang,
                    method="mt", source="mt",
                    lineage={"origin_id": post.id})
            for post, text in zip(dataset.posts, texts)])
        corpus.save_corpus(translated, args.outfile)
        print(f"translated {len(translated)} posts -> {args.outfile}")
    return EXIT_OK


def cmd_substitute(args) -> int:
    cfg = _load_pipeline_config(args)
    subst = cfg.substitution
    if args.replacement_seed is not None:
        subst = replace(subst, replacement_seed=args.replacement_seed)
    if args.seed is not None:
        subst = replace(subst, rng_seed=args.seed)
    table = entity_table.load_entity_table(args.table)
    masked = ces.load_masked(args.infile)
    out = []
    for m in masked:
        out.extend(ces.substitute(m, table, subst))
    corpus.save_corpus(corpus.Dataset(out), args.outfile)
    print(f"substituted {len(masked)} masked posts into {len(out)} synthetic "
          f"posts -> {args.outfile}")
    return EXIT_OK


def cmd_generate(args) -> int:
    cfg = _load_pipeline_config(args)
    gen_cfg = cfg.generation
    if args.seed is not None:
        gen_cfg = replace(gen_cfg, rng_seed=args.seed)
    if args.target_group:
        gen_cfg = replace(gen_cfg, target_group=args.target_group)
    backend = _generation_backend(args, cfg)
    seeds = corpus.load_corpus(args.seeds).hateful()
    posts = lm_gen.generate_posts(seeds, args.n, backend, gen_cfg,
                                  retry=_retry_policy(cfg))
    corpus.save_corpus(corpus.Dataset(posts), args.outfile)
    print(f"generated {len(posts)} posts from {len(seeds)} seeds "
          f"-> {args.outfile}")
    return EXIT_OK


def cmd_schedule(args) -> int:
    arms = experiment.build_schedule(
        max_total_hateful=args.max_total, step=args.step,
        baseline_original=args.baseline, rng_seed=args.seed,
        non_hateful=args.non_hateful)
    record = {"rng_seed": args.seed, "arms": [asdict(a) for a in arms]}
    Path(args.outfile).parent.mkdir(parents=True, exist_ok=True)
    with open(args.outfile, "w", encoding="utf-8") as fh:
        json.dump(record, fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    print(f"wrote {len(arms)} arms -> {args.outfile}")
    return EXIT_OK


def _load_schedule(path) -> list[experiment.ArmSpec]:
    with open(path, encoding="utf-8") as fh:
        record = json.load(fh)
    return [experiment.ArmSpec(**a) for a in record["arms"]]


def cmd_materialize(args) -> int:
    cfg = _load_pipeline_config(args)
    arms = _load_schedule(args.schedule)
    pools = {
        "non_hateful": corpus.load_corpus(args.non_hateful),
        "original_hateful": corpus.load_corpus(args.original),
        "synthetic": {},
    }
    for method, path in (("mt", args.synthetic_mt), ("ces", args.synthetic_ces),
                         ("lm", args.synthetic_lm)):
        if path:
            pools["synthetic"][method] = corpus.load_corpus(path)
    timestamp = args.timestamp or cfg.timestamp
    out_root = Path(args.out_root)
    for arm in arms:
        experiment.materialize(arm, pools, out_root / arm.arm_id,
                               timestamp=timestamp)
    print(f"materialized {len(arms)} arms under {out_root}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_pipeline_config(args)
    tcfg = cfg.training
    if args.seed is not None:
        tcfg = replace(tcfg, rng_seed=args.seed)
    dataset = corpus.load_corpus(args.train)
    model = classifier.train(dataset, cfg.features, tcfg)
    classifier.save_model(model, args.outfile)
    print(f"trained on {len(dataset)} posts "
          f"(final val loss {model.val_losses[-1]:.4f}) -> {args.outfile}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load_pipeline_config(args)
    tcfg = cfg.training
    if args.seed is not None:
        tcfg = replace(tcfg, rng_seed=args.seed)
    train_set = corpus.load_corpus(args.train)
    test_set = corpus.load_corpus(args.test)
    report = classifier.evaluate(train_set, test_set, cfg.features, tcfg)
    Path(args.outfile).parent.mkdir(parents=True, exist_ok=True)
    with open(args.outfile, "w", encoding="utf-8") as fh:
        json.dump(report, fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    print(f"mean macro F1 {report['mean']:.4f} over {tcfg.runs} runs "
          f"-> {args.outfile}")
    return EXIT_OK


def cmd_attribute(args) -> int:
    model = classifier.load_model(args.model)
    test_set = corpus.load_corpus(args.test)
    table = entity_table.load_entity_table(args.table)
    report = classifier.attribute(model, test_set, table, k=args.k)
    record = {"top_tokens": [{"token": t, "mean_contribution": c}
                             for t, c in report.top_tokens],
              "entity_share": report.entity_share}
    Path(args.outfile).parent.mkdir(parents=True, exist_ok=True)
    with open(args.outfile, "w", encoding="utf-8") as fh:
        json.dump(record, fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    print(f"entity share {report.entity_share:.2%} of top {len(report.top_tokens)} "
          f"tokens -> {args.outfile}")
    return EXIT_OK


def cmd_report(args) -> int:
    run_root = Path(args.runs)
    if not run_root.is_dir():
        raise DataError(f"run directory not found: {run_root}")
    rows = []
    for manifest_path in sorted(run_root.glob("*/manifest.json")):
        with manifest_path.open(encoding="utf-8") as fh:
            manifest = json.load(fh)
        problems = experiment.verify_manifest(manifest_path.parent)
        if problems:
            raise DataError(
                f"{manifest_path.parent.name}: manifest verification failed: "
                + "; ".join(problems))
        arm = manifest["arm"]
        row = {"arm_id": arm["arm_id"], "method": arm["method"],
               "original_hateful": arm["original_hateful"],
               "synthetic_hateful": arm["synthetic_hateful"],
               "mean_macro_f1": "", "f1_runs": ""}
        eval_path = manifest_path.parent / "report.json"
        if eval_path.exists():
            with eval_path.open(encoding="utf-8") as fh:
                eval_report = json.load(fh)
            row["mean_macro_f1"] = f"{eval_report['mean']:.6f}"
            row["f1_runs"] = ";".join(f"{f:.6f}"
                                      for f in eval_report["macro_f1_runs"])
        rows.append(row)
    rows.sort(key=lambda r: (r["original_hateful"] + r["synthetic_hateful"],
                             r["arm_id"]))
    Path(args.outfile).parent.mkdir(parents=True, exist_ok=True)
    with open(args.outfile, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["arm_id", "method",
                                                "original_hateful",
                                                "synthetic_hateful",
                                                "mean_macro_f1", "f1_runs"],
                                lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} arm rows -> {args.outfile}")
    return EXIT_OK


def cmd_validate_config(args) -> int:
    cfg = load_config(args.config)
    problems = validate_config(cfg)
    if problems:
        return _fail("config", "configuration is invalid", details=problems,
                     code=EXIT_CONFIG)
    print("config ok")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hatesynth",
        description="Synthesize and evaluate hate-speech training data for "
                    "limited-data languages.")
    parser.add_argument("--version", action="version",
                        version=f"hatesynth {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="clean and filter a corpus file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--lang", default=None)
    p.set_defaults(handler=cmd_preprocess)

    p = sub.add_parser("table", help="entity table utilities")
    table_sub = p.add_subparsers(dest="table_command", required=True)
    ps = table_sub.add_parser("stats", help="per-category entry counts")
    ps.add_argument("--table", default=None)
    ps.add_argument("--lang", default=None)
    ps.set_defaults(handler=cmd_table_stats)
    pv = table_sub.add_parser("validate", help="source/target feasibility")
    pv.add_argument("--source", required=True)
    pv.add_argument("--target", required=True)
    pv.set_defaults(handler=cmd_table_validate)

    p = sub.add_parser("mask", help="mask entity mentions in a corpus")
    p.add_argument("--config", default=None)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--table", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--max-ngram", type=int, default=None)
    p.add_argument("--only-masked", action="store_true",
                   help="drop posts with zero mask spans")
    p.set_defaults(handler=cmd_mask)

    p = sub.add_parser("translate", help="translate masked posts or a corpus")
    p.add_argument("--config", default=None)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--from", dest="from_lang", required=True)
    p.add_argument("--to", dest="to_lang", required=True)
    p.add_argument("--kind", choices=["masked", "corpus"], default="masked")
    p.add_argument("--backend", choices=["mock", "http"], default="mock")
    p.add_argument("--mock-prefix", default="t:",
                   help="token prefix used by the mock backend ('' = identity)")
    p.add_argument("--url", default=None)
    p.add_argument("--token-env", default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--audit", default=None,
                   help="write mask audits to this JSON-Lines file")
    p.set_defaults(handler=cmd_translate)

    p = sub.add_parser("substitute", help="replace mask tokens from a table")
    p.add_argument("--config", default=None)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--table", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--replacement-seed", type=int, default=None,
                   help="variants per masked post")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(handler=cmd_substitute)

    p = sub.add_parser("generate", help="few-shot LM generation loop")
    p.add_argument("--config", default=None)
    p.add_argument("--seeds", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--backend", choices=["mock", "http"], default="mock")
    p.add_argument("--responses", default=None,
                   help="JSON fixture file for the mock backend")
    p.add_argument("--url", default=None)
    p.add_argument("--token-env", default=None)
    p.add_argument("--target-group", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("schedule", help="emit the augmentation arm schedule")
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--max-total", type=int, default=450)
    p.add_argument("--step", type=int, default=50)
    p.add_argument("--baseline", type=int, default=100)
    p.add_argument("--non-hateful", type=int, default=450)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_schedule)

    p = sub.add_parser("materialize", help="write train sets for every arm")
    p.add_argument("--config", default=None)
    p.add_argument("--schedule", required=True)
    p.add_argument("--non-hateful", dest="non_hateful", required=True)
    p.add_argument("--original", required=True)
    p.add_argument("--synthetic-mt", default=None)
    p.add_argument("--synthetic-ces", default=None)
    p.add_argument("--synthetic-lm", default=None)
    p.add_argument("--out-root", required=True)
    p.add_argument("--timestamp", default=None,
                   help="fixed manifest timestamp for reproducible runs")
    p.set_defaults(handler=cmd_materialize)

    p = sub.add_parser("train", help="train the built-in classifier")
    p.add_argument("--config", default=None)
    p.add_argument("--train", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="train+evaluate with seeded runs")
    p.add_argument("--config", default=None)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("attribute", help="token attribution report")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--table", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--k", type=int, default=20)
    p.set_defaults(handler=cmd_attribute)

    p = sub.add_parser("report", help="aggregate arm results into a CSV")
    p.add_argument("--runs", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.set_defaults(handler=cmd_report)

    p = sub.add_parser("validate-config", help="check a pipeline config file")
    p.add_argument("config")
    p.set_defaults(handler=cmd_validate_config)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "config", None) and args.command != "validate-config":
            require_valid(load_config(args.config))
        return args.handler(args)
    except ConfigError as exc:
        return _fail("config", str(exc), details=exc.violations,
                     code=EXIT_CONFIG)
    except BackendError as exc:
        return _fail("backend", str(exc), code=EXIT_BACKEND)
    except DataError as exc:
        return _fail("data", str(exc), code=EXIT_DATA)
    except HatesynthError as exc:
        return _fail("error", str(exc), code=EXIT_DATA)


if __name__ == "__main__":
    sys.exit(main())
