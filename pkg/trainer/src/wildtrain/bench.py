"""Backbone bake-off: train each candidate under one config, tabulate."""

from __future__ import annotations

import time
from dataclasses import dataclass

from .manifest import PreparedDataset
from .training import TrainingConfig, evaluate, train

__all__ = ["BenchRow", "benchmark_backbones", "format_table"]


@dataclass(frozen=True)
class BenchRow:
    backbone: str
    ok: bool
    test_accuracy: float | None = None
    params: int | None = None
    epoch_seconds: float | None = None
    error: str | None = None


def benchmark_backbones(
    config_base: TrainingConfig, backbones: list[str], dataset: PreparedDataset
) -> list[BenchRow]:
    """One row per backbone under identical config; a failing backbone is
    marked failed without aborting the rest."""
    if not backbones:
        raise ValueError("need at least one backbone id")
    rows = []
    for backbone in backbones:
        config = config_base.replace(backbone=backbone)
        start = time.monotonic()
        try:
            model, history = train(config, dataset)
            elapsed = time.monotonic() - start
            report = evaluate(model, dataset, "test")
            rows.append(
                BenchRow(
                    backbone=backbone,
                    ok=True,
                    test_accuracy=report.overall_accuracy,
                    params=model.count_params(),
                    epoch_seconds=elapsed / config.epochs,
                )
            )
        except Exception as exc:
            rows.append(BenchRow(backbone=backbone, ok=False, error=str(exc)))
    return rows


def format_table(rows: list[BenchRow]) -> str:
    lines = [f"{'backbone':<22} {'status':<8} {'test_acc':>8} {'params':>12} {'s/epoch':>8}"]
    for row in rows:
        if row.ok:
            lines.append(
                f"{row.backbone:<22} {'ok':<8} {row.test_accuracy:>8.4f} "
                f"{row.params:>12d} {row.epoch_seconds:>8.1f}"
            )
        else:
            lines.append(f"{row.backbone:<22} {'failed':<8} ({row.error})")
    return "\n".join(lines)
