"""K-fold cross-validation driver over the manifest's fold assignments."""

from __future__ import annotations

import json
from pathlib import Path

from .manifest import PreparedDataset
from .training import EvalReport, TrainingConfig, evaluate, train

__all__ = ["cross_validate", "write_cv_report"]


def cross_validate(
    config: TrainingConfig, dataset: PreparedDataset, folds: list[int] | None = None
) -> list[EvalReport]:
    """Train a fresh model per fold on the remaining folds, evaluate on the
    held-out one; returns one report per fold, in fold order."""
    folds = dataset.fold_values() if folds is None else folds
    if len(folds) < 2:
        raise ValueError(f"need at least 2 folds, got {folds}")
    reports = []
    for fold in folds:
        held_out = [r for r in dataset.records if r.fold == fold]
        rest = [r for r in dataset.records if r.fold is not None and r.fold != fold]
        if not held_out or not rest:
            raise ValueError(f"fold {fold} does not partition the records")
        model, _ = train(config, dataset, train_records=rest, test_records=held_out)
        reports.append(evaluate(model, dataset, records=held_out, fold=fold))
    return reports


def write_cv_report(reports: list[EvalReport], path: str | Path) -> None:
    payload = {
        "folds": [r.to_json_obj() for r in reports],
        "mean_accuracy": sum(r.overall_accuracy for r in reports) / len(reports),
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
