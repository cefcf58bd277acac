"""Trainer command line: train, eval, cv, bench.

Config values come from defaults < a flat ``key = value`` config file <
explicit flags. Artifacts land in the ``--out`` directory: history.jsonl,
curves_acc.png, curves_loss.png, report.json, best.weights.h5,
train_meta.json (and cv_report.json / bench.txt for those commands).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from .bench import benchmark_backbones, format_table
from .crossval import cross_validate, write_cv_report
from .curves import plot_curves
from .manifest import ManifestFormatError, load_manifest
from .model import BACKBONES, WeightsUnavailableError, build_model
from .training import TrainingConfig, evaluate, train, write_report

_CONFIG_TYPES = {
    "backbone": str,
    "epochs": int,
    "learning_rate": float,
    "batch_size": int,
    "input_size": int,
    "seed": int,
    "weights": str,
    "deterministic": bool,
}


def _parse_config_file(path: str) -> dict:
    values: dict = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        key, sep, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip().strip('"')
        if not sep or key not in _CONFIG_TYPES:
            raise ValueError(f"{path}:{lineno}: unknown or malformed entry {line!r}")
        kind = _CONFIG_TYPES[key]
        values[key] = raw == "true" if kind is bool else kind(raw)
    return values


def _effective_config(args) -> TrainingConfig:
    config = TrainingConfig()
    if args.config:
        config = config.replace(**_parse_config_file(args.config))
    overrides = {}
    for name in ("seed", "epochs", "backbone", "weights", "learning_rate",
                 "batch_size", "input_size"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    return config.replace(**overrides) if overrides else config


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", required=True, help="manifest.jsonl from the prep pipeline")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--backbone", choices=sorted(BACKBONES), default=None)
    p.add_argument("--weights", choices=["imagenet", "none"], default=None)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--input-size", dest="input_size", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wildtrain")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fine-tune and emit history, curves, report")
    _add_common(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="evaluate a trained run on a split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--run", required=True, help="output directory of a train run")
    p.add_argument("--split", default="test", choices=["train", "test"])

    p = sub.add_parser("cv", help="k-fold cross-validation over manifest folds")
    _add_common(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bench", help="compare several backbones under one config")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument(
        "--backbones", default=",".join(sorted(BACKBONES)),
        help="comma-separated backbone ids",
    )
    return parser


def _cmd_train(args) -> int:
    config = _effective_config(args)
    dataset = load_manifest(args.manifest)
    out = Path(args.out)
    model, history = train(config, dataset, out_dir=out)
    plot_curves(history, out)
    report = evaluate(model, dataset, "test")
    write_report(report, out / "report.json")
    meta = {
        "backbone": config.backbone,
        "input_size": config.input_size,
        "n_classes": len(dataset.class_names),
        "weights": config.weights,
    }
    (out / "train_meta.json").write_text(json.dumps(meta, indent=2) + "\n", "utf-8")
    print(f"final test accuracy: {report.overall_accuracy:.4f} (run -> {out})")
    return 0


def _cmd_eval(args) -> int:
    dataset = load_manifest(args.manifest)
    run = Path(args.run)
    meta = json.loads((run / "train_meta.json").read_text("utf-8"))
    model = build_model(
        meta["backbone"], meta["input_size"], meta["n_classes"], weights="none"
    )
    model.load_weights(run / "best.weights.h5")
    report = evaluate(model, dataset, args.split)
    print(json.dumps(report.to_json_obj(), indent=2))
    return 0


def _cmd_cv(args) -> int:
    config = _effective_config(args)
    dataset = load_manifest(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = cross_validate(config, dataset)
    write_cv_report(reports, out / "cv_report.json")
    for report in reports:
        print(f"fold {report.fold}: accuracy {report.overall_accuracy:.4f}")
    return 0


def _cmd_bench(args) -> int:
    config = _effective_config(args)
    dataset = load_manifest(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = benchmark_backbones(config, args.backbones.split(","), dataset)
    table = format_table(rows)
    (out / "bench.txt").write_text(table + "\n", "utf-8")
    print(table)
    return 0


_COMMANDS = {"train": _cmd_train, "eval": _cmd_eval, "cv": _cmd_cv, "bench": _cmd_bench}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ManifestFormatError, WeightsUnavailableError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
