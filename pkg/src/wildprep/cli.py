"""Command-line front end binding the pipeline stages into reproducible runs.

Exit codes: 0 success, 1 user error, 2 partial processing failure.
Global flags (``--seed``, ``--jobs``, ``--force``, ``--config``) are
accepted by every subcommand; flag values override config-file values,
which override built-in defaults.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import dataset
from .config import PipelineConfig, read_config_file
from .errors import WildprepError

EXIT_OK = 0
EXIT_USER_ERROR = 1
EXIT_PARTIAL = 2


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="pipeline RNG seed")
    common.add_argument(
        "--jobs", type=int, default=None,
        help="worker pool size for image processing (default: available cores)",
    )
    common.add_argument(
        "--force", action="store_true", help="overwrite existing outputs"
    )
    common.add_argument("--config", default=None, help="flat key=value config file")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wildprep",
        description="Segment, denoise, augment, balance, split, and fold a "
        "class-per-directory photo corpus.",
    )
    common = _common_options()
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="scan a corpus into a manifest")
    p.add_argument("root")
    p.add_argument("manifest_out")

    p = sub.add_parser("balance", parents=[common], help="oversample classes to parity")
    p.add_argument("manifest")
    p.add_argument("-o", "--out", default=None, help="output manifest (default: in place)")

    p = sub.add_parser("split", parents=[common], help="assign train/test split")
    p.add_argument("manifest")
    p.add_argument("-o", "--out", default=None)
    p.add_argument("--test-fraction", type=float, default=None)

    p = sub.add_parser("kfold", parents=[common], help="assign cross-validation folds")
    p.add_argument("manifest")
    p.add_argument("-o", "--out", default=None)
    p.add_argument("--folds", type=int, default=None)

    p = sub.add_parser(
        "segment", parents=[common],
        help="segment/resize every record into an output tree",
    )
    p.add_argument("manifest")
    p.add_argument("out_dir")

    p = sub.add_parser("stats", parents=[common], help="print manifest statistics")
    p.add_argument("manifest")

    p = sub.add_parser(
        "run-all", parents=[common],
        help="ingest, balance, split, fold, and process in one run",
    )
    p.add_argument("root")
    p.add_argument("out_dir")
    p.add_argument("--test-fraction", type=float, default=None)
    p.add_argument("--folds", type=int, default=None)
    return parser


def effective_config(args: argparse.Namespace) -> PipelineConfig:
    """defaults < config file < explicit flags."""
    config = PipelineConfig()
    if args.config:
        config = read_config_file(args.config, config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "test_fraction", None) is not None:
        overrides["test_fraction"] = args.test_fraction
    if getattr(args, "folds", None) is not None:
        overrides["folds"] = args.folds
    return config.replace(**overrides) if overrides else config


def _refuse_overwrite(path: Path, force: bool) -> None:
    if path.exists() and not force:
        raise WildprepError(f"refusing to overwrite {path} (use --force)")


def _write_back(manifest, in_path: str, out: str | None, force: bool) -> Path:
    if out is None:
        if not force:
            raise WildprepError(
                f"refusing to rewrite {in_path} in place (use --force or -o)"
            )
        target = Path(in_path)
    else:
        target = Path(out)
        _refuse_overwrite(target, force)
    dataset.write_manifest(manifest, target)
    return target


def _jobs(args: argparse.Namespace) -> int:
    if args.jobs is not None:
        if args.jobs < 1:
            raise WildprepError(f"--jobs must be >= 1, got {args.jobs}")
        return args.jobs
    return os.cpu_count() or 1


def format_stats(manifest: dataset.DatasetManifest) -> str:
    lines = [f"records: {len(manifest.records)}"]
    lines.append("classes:")
    totals = manifest.class_counts()
    originals = manifest.class_counts(dataset.ORIGINAL)
    for name in dataset.CLASS_NAMES:
        if name not in totals:
            continue
        total = totals[name]
        orig = originals.get(name, 0)
        lines.append(
            f"  {name} ({dataset.class_index(name)}): total={total} "
            f"original={orig} synthesized={total - orig}"
        )
    prov = {p: 0 for p in (dataset.ORIGINAL, dataset.SYNTHESIZED)}
    split = {s: 0 for s in ("train", "test", "unassigned")}
    folds: dict[str, int] = {}
    for rec in manifest.records:
        prov[rec.provenance] += 1
        split[rec.split] += 1
        key = str(rec.fold) if rec.fold is not None else "unassigned"
        folds[key] = folds.get(key, 0) + 1
    lines.append(
        f"provenance: original={prov[dataset.ORIGINAL]} "
        f"synthesized={prov[dataset.SYNTHESIZED]}"
    )
    lines.append(
        f"split: train={split['train']} test={split['test']} "
        f"unassigned={split['unassigned']}"
    )
    fold_bits = " ".join(
        f"{key}={folds[key]}"
        for key in sorted(folds, key=lambda s: (s == "unassigned", s))
    )
    lines.append(f"folds: {fold_bits}")
    return "\n".join(lines)


def _report_failures(failures: list[tuple[str, str]]) -> None:
    print(f"{len(failures)} record(s) failed:", file=sys.stderr)
    for rid, reason in failures:
        print(f"  {rid}: {reason}", file=sys.stderr)


def _cmd_ingest(args) -> int:
    config = effective_config(args)
    manifest = dataset.ingest(args.root, seed=config.seed, config_digest=config.digest())
    out = Path(args.manifest_out)
    _refuse_overwrite(out, args.force)
    dataset.write_manifest(manifest, out)
    print(f"ingested {len(manifest.records)} records -> {out}")
    return EXIT_OK


def _cmd_balance(args) -> int:
    config = effective_config(args)
    manifest = dataset.read_manifest(args.manifest)
    balanced = dataset.balance(manifest, config.seed, config.augment_policy())
    target = _write_back(balanced, args.manifest, args.out, args.force)
    added = len(balanced.records) - len(manifest.records)
    print(f"balanced: +{added} synthesized records -> {target}")
    return EXIT_OK


def _cmd_split(args) -> int:
    config = effective_config(args)
    manifest = dataset.read_manifest(args.manifest)
    split = dataset.stratified_split(manifest, config.test_fraction, config.seed)
    target = _write_back(split, args.manifest, args.out, args.force)
    n_test = sum(1 for r in split.records if r.split == "test")
    print(f"split: {n_test} test / {len(split.records) - n_test} train -> {target}")
    return EXIT_OK


def _cmd_kfold(args) -> int:
    config = effective_config(args)
    manifest = dataset.read_manifest(args.manifest)
    plan = dataset.kfold_plan(manifest, config.folds, config.seed)
    folded = dataset.apply_fold_plan(manifest, plan)
    target = _write_back(folded, args.manifest, args.out, args.force)
    print(f"kfold: {plan.k} folds -> {target}")
    return EXIT_OK


def _cmd_segment(args) -> int:
    config = effective_config(args)
    manifest = dataset.read_manifest(args.manifest)
    out_dir = Path(args.out_dir)
    _refuse_overwrite(out_dir / "manifest.jsonl", args.force)
    processed, failures = dataset.preprocess_all(manifest, config, out_dir, _jobs(args))
    dataset.write_manifest(processed, out_dir / "manifest.jsonl")
    _write_run_lock(out_dir, config)
    if failures:
        _report_failures(failures)
        return EXIT_PARTIAL
    print(f"processed {len(processed.records)} records -> {out_dir}")
    return EXIT_OK


def _cmd_stats(args) -> int:
    manifest = dataset.read_manifest(args.manifest)
    print(format_stats(manifest))
    return EXIT_OK


def _write_run_lock(out_dir: Path, config: PipelineConfig) -> None:
    text = config.to_text() + f"# config_digest = {config.digest()}\n"
    (out_dir / "run.lock").write_text(text, encoding="utf-8")


def _cmd_run_all(args) -> int:
    config = effective_config(args)
    out_dir = Path(args.out_dir)
    manifest_path = out_dir / "manifest.jsonl"
    _refuse_overwrite(manifest_path, args.force)

    manifest = dataset.ingest(args.root, seed=config.seed, config_digest=config.digest())
    manifest = dataset.balance(manifest, config.seed, config.augment_policy())
    manifest = dataset.stratified_split(manifest, config.test_fraction, config.seed)
    plan = dataset.kfold_plan(manifest, config.folds, config.seed)
    manifest = dataset.apply_fold_plan(manifest, plan)
    manifest, failures = dataset.preprocess_all(manifest, config, out_dir, _jobs(args))
    dataset.write_manifest(manifest, manifest_path)
    _write_run_lock(out_dir, config)

    print(format_stats(manifest))
    if failures:
        _report_failures(failures)
        return EXIT_PARTIAL
    print(f"run complete -> {out_dir}")
    return EXIT_OK


_COMMANDS = {
    "ingest": _cmd_ingest,
    "balance": _cmd_balance,
    "split": _cmd_split,
    "kfold": _cmd_kfold,
    "segment": _cmd_segment,
    "stats": _cmd_stats,
    "run-all": _cmd_run_all,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(format="%(levelname)s %(message)s", level=logging.WARNING)
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except WildprepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER_ERROR


if __name__ == "__main__":
    sys.exit(main())
