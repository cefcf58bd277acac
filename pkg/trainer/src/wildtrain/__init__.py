"""wildtrain: fine-tunes a pretrained backbone on a dataset prepared by the
wildprep pipeline (consumed via its manifest.jsonl + PNG tree contract),
evaluates it, cross-validates, and renders accuracy/loss curves."""

from .bench import BenchRow, benchmark_backbones, format_table
from .crossval import cross_validate, write_cv_report
from .curves import load_history, plot_curves, write_history
from .manifest import ManifestFormatError, PreparedDataset, Record, load_manifest
from .model import (
    BACKBONES,
    HeadSpec,
    WeightsUnavailableError,
    build_model,
    head_param_count,
    pooled_feature_width,
)
from .training import EpochMetrics, EvalReport, TrainingConfig, evaluate, train

__version__ = "0.1.0"
