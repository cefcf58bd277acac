"""Accuracy/loss curve rendering and history persistence."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .training import EpochMetrics

__all__ = ["plot_curves", "write_history", "load_history"]


def write_history(history: list[EpochMetrics], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for metrics in history:
            fh.write(json.dumps(metrics.to_json_obj()) + "\n")


def load_history(path: str | Path) -> list[EpochMetrics]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [EpochMetrics.from_json_obj(json.loads(line)) for line in lines if line.strip()]


def _plot(epochs, train_series, test_series, ylabel, title, path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(epochs, train_series, marker="o", markersize=3, label="train")
    ax.plot(epochs, test_series, marker="o", markersize=3, label="test")
    ax.set_xlabel("epoch")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_curves(history: list[EpochMetrics], out_dir: str | Path) -> tuple[Path, Path]:
    """Write accuracy-vs-epoch and loss-vs-epoch plots (train and test
    series on each) plus the raw history as JSON lines; returns the two
    image paths."""
    if not history:
        raise ValueError("history is empty")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    epochs = [m.epoch for m in history]
    acc_path = out / "curves_acc.png"
    loss_path = out / "curves_loss.png"
    _plot(
        epochs, [m.train_acc for m in history], [m.test_acc for m in history],
        "accuracy", "Accuracy vs epoch", acc_path,
    )
    _plot(
        epochs, [m.train_loss for m in history], [m.test_loss for m in history],
        "loss", "Loss vs epoch", loss_path,
    )
    write_history(history, out / "history.jsonl")
    return acc_path, loss_path
