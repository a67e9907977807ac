"""Harness CLI: fine-tune on arm files and run entity-share attribution."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import HarnessError, DataFormatError, __version__
from .explain import shap_entity_share
from .model import HarnessConfig, finetune_eval, load_bundle


def _write_json(payload, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def cmd_finetune(args) -> int:
    config = HarnessConfig(seed=args.seed, model_name=args.model)
    overrides = {}
    for field in ("batch_size", "learning_rate", "epochs", "runs",
                  "max_length"):
        value = getattr(args, field)
        if value is not None:
            overrides[field] = value
    if overrides:
        config = replace(config, **overrides)
    report = finetune_eval(args.train, args.test, config,
                           save_model_dir=args.save_model)
    _write_json(report, args.out)
    print(f"mean macro F1 {report['mean']:.4f} over "
          f"{len(report['macro_f1_runs'])} runs -> {args.out}")
    return 0


def cmd_entity_share(args) -> int:
    bundle = load_bundle(args.model_dir)
    report = shap_entity_share(bundle, args.test, args.table, k=args.k,
                               n_permutations=args.permutations,
                               seed=args.seed)
    _write_json(report, args.out)
    print(f"entity share {report['entity_share']:.2%} of top "
          f"{len(report['top_words'])} words -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="harness",
        description="Fine-tune a multilingual BERT classifier on pipeline "
                    "arm files and analyze entity contributions.")
    parser.add_argument("--version", action="version",
                        version=f"mbert-harness {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("finetune", help="fine-tune and evaluate macro F1")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", default=HarnessConfig.model_name,
                   help="model name or local path (default: %(default)s)")
    p.add_argument("--save-model", default=None,
                   help="directory to save the last run's model")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--max-length", type=int, default=None)
    p.set_defaults(handler=cmd_finetune)

    p = sub.add_parser("entity-share",
                       help="Shapley attribution and entity share")
    p.add_argument("--model-dir", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--table", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--permutations", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_entity_share)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except DataFormatError as exc:
        print(json.dumps({"error": {"kind": "data", "message": str(exc)}}),
              file=sys.stderr)
        return 4
    except HarnessError as exc:
        print(json.dumps({"error": {"kind": "harness", "message": str(exc)}}),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
