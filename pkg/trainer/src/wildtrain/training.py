"""Training loop, per-epoch metrics, and evaluation reports."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

os.environ.setdefault("TF_CPP_MIN_LOG_LEVEL", "2")

import keras
import numpy as np

from .manifest import PreparedDataset, load_images
from .model import HeadSpec, build_model, preprocess_for

__all__ = ["TrainingConfig", "EpochMetrics", "EvalReport", "train", "evaluate"]


@dataclass(frozen=True)
class TrainingConfig:
    """Hyperparameters: Adam with categorical cross-entropy throughout."""

    backbone: str = "inception_resnet_v2"
    epochs: int = 40
    learning_rate: float = 0.0001
    batch_size: int = 32
    input_size: int = 299
    seed: int = 0
    weights: str = "imagenet"   # "none" trains from fresh initialization
    deterministic: bool = False  # enable the framework's deterministic ops
    head: HeadSpec = field(default_factory=HeadSpec)

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.input_size < 32:
            raise ValueError(f"input_size must be >= 32, got {self.input_size}")

    def replace(self, **overrides) -> "TrainingConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(overrides)
        return TrainingConfig(**values)


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    train_loss: float
    train_acc: float
    test_loss: float
    test_acc: float

    def to_json_obj(self) -> dict:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "train_acc": self.train_acc,
            "test_loss": self.test_loss,
            "test_acc": self.test_acc,
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "EpochMetrics":
        return EpochMetrics(
            epoch=obj["epoch"],
            train_loss=obj["train_loss"],
            train_acc=obj["train_acc"],
            test_loss=obj["test_loss"],
            test_acc=obj["test_acc"],
        )


@dataclass(frozen=True)
class EvalReport:
    """Accuracy accounting for one evaluation pass.

    ``confusion`` is row=true class, column=predicted class, over the
    manifest's class space; row sums equal the per-class sample counts and
    overall accuracy is trace/total.
    """

    class_names: tuple[str, ...]
    overall_accuracy: float
    per_class_accuracy: dict[str, float]
    confusion: tuple[tuple[int, ...], ...]
    fold: int | None = None

    def to_json_obj(self) -> dict:
        return {
            "class_names": list(self.class_names),
            "overall_accuracy": self.overall_accuracy,
            "per_class_accuracy": self.per_class_accuracy,
            "confusion": [list(row) for row in self.confusion],
            "fold": self.fold,
        }


def _seed_everything(config: TrainingConfig) -> None:
    keras.utils.set_random_seed(config.seed)
    if config.deterministic:
        import tensorflow as tf

        tf.config.experimental.enable_op_determinism()


def _prepared_arrays(config: TrainingConfig, dataset: PreparedDataset, records):
    xs, ys = load_images(dataset, records, config.input_size)
    xs = preprocess_for(config.backbone)(xs)
    onehot = keras.utils.to_categorical(ys, num_classes=len(dataset.class_names))
    return xs, onehot, ys


def train(
    config: TrainingConfig,
    dataset: PreparedDataset,
    out_dir: str | Path | None = None,
    train_records=None,
    test_records=None,
) -> tuple[keras.Model, list[EpochMetrics]]:
    """Fine-tune a backbone on the dataset's train split.

    Runs ``config.epochs`` epochs of Adam at ``config.learning_rate`` with
    categorical cross-entropy, shuffling per epoch from ``config.seed``;
    records train/test loss and accuracy every epoch and, when ``out_dir``
    is given, checkpoints the weights with the best test accuracy to
    ``best.weights.h5``. Explicit record lists override the manifest's
    train/test split (the cross-validation driver uses this).
    """
    train_records = (
        dataset.split_records("train") if train_records is None else train_records
    )
    test_records = (
        dataset.split_records("test") if test_records is None else test_records
    )
    if not train_records:
        raise ValueError("training split is empty")
    if not test_records:
        raise ValueError("test split is empty")

    _seed_everything(config)
    x_train, y_train, _ = _prepared_arrays(config, dataset, train_records)
    x_test, y_test, _ = _prepared_arrays(config, dataset, test_records)

    model = build_model(
        config.backbone,
        config.input_size,
        len(dataset.class_names),
        weights=config.weights,
        head=config.head,
    )
    model.compile(
        optimizer=keras.optimizers.Adam(learning_rate=config.learning_rate),
        loss="categorical_crossentropy",
        metrics=["accuracy"],
    )

    callbacks = []
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        callbacks.append(
            keras.callbacks.ModelCheckpoint(
                filepath=str(out / "best.weights.h5"),
                monitor="val_accuracy",
                save_best_only=True,
                save_weights_only=True,
            )
        )

    fit = model.fit(
        x_train,
        y_train,
        validation_data=(x_test, y_test),
        epochs=config.epochs,
        batch_size=config.batch_size,
        shuffle=True,
        verbose=0,
        callbacks=callbacks,
    )
    history = [
        EpochMetrics(
            epoch=i,
            train_loss=float(fit.history["loss"][i]),
            train_acc=float(fit.history["accuracy"][i]),
            test_loss=float(fit.history["val_loss"][i]),
            test_acc=float(fit.history["val_accuracy"][i]),
        )
        for i in range(config.epochs)
    ]
    return model, history


def evaluate(
    model: keras.Model,
    dataset: PreparedDataset,
    split: str = "test",
    records=None,
    fold: int | None = None,
    batch_size: int = 32,
) -> EvalReport:
    """Deterministic inference pass over a split (or explicit record list)."""
    records = dataset.split_records(split) if records is None else records
    if not records:
        raise ValueError(f"split {split!r} is empty")
    input_size = int(model.input.shape[1])
    xs, ys = load_images(dataset, records, input_size)
    backbone = model.name.removesuffix("_classifier")
    xs = preprocess_for(backbone)(xs)
    probs = model.predict(xs, batch_size=batch_size, verbose=0)
    predicted = probs.argmax(axis=1)

    names = dataset.class_names
    n = len(names)
    confusion = np.zeros((n, n), dtype=np.int64)
    for true, pred in zip(ys, predicted):
        confusion[true, pred] += 1
    per_class = {}
    for i, name in enumerate(names):
        row_total = int(confusion[i].sum())
        per_class[name] = float(confusion[i, i] / row_total) if row_total else 0.0
    overall = float(np.trace(confusion) / len(records))
    return EvalReport(
        class_names=tuple(names),
        overall_accuracy=overall,
        per_class_accuracy=per_class,
        confusion=tuple(tuple(int(v) for v in row) for row in confusion),
        fold=fold,
    )


def write_report(report: EvalReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report.to_json_obj(), indent=2) + "\n", encoding="utf-8"
    )
