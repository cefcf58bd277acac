"""Shared fixtures: a two-class desk corpus prepared by the pipeline CLI.

The corpus is synthetic but strongly class-separable (subject shape and
palette differ per class), and it reaches this package exactly the way a
real one would: by running the preparation pipeline's command line and
consuming the manifest + PNG tree it writes.
"""

import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from wildtrain.manifest import PreparedDataset, load_manifest


def _noise_background(gen, color, jitter=12):
    base = np.array(color, dtype=np.float64)
    img = base + gen.uniform(-jitter, jitter, size=(64, 64, 3))
    return img


def elephant_image(gen) -> np.ndarray:
    """Gray elliptical subject on a green savanna-ish background."""
    img = _noise_background(gen, (110, 165, 105))
    yy, xx = np.mgrid[0:64, 0:64]
    cx, cy = gen.uniform(26, 38), gen.uniform(28, 40)
    rx, ry = gen.uniform(15, 23), gen.uniform(11, 17)
    body = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
    img[body] = np.array((118, 118, 124)) + gen.uniform(-8, 8, size=(int(body.sum()), 3))
    trunk = ((xx - cx - rx * 0.9) / 4.0) ** 2 + ((yy - cy - ry * 0.6) / 8.0) ** 2 <= 1.0
    img[trunk] = (100, 100, 108)
    return np.clip(img, 0, 255).astype(np.uint8)


def rhino_image(gen) -> np.ndarray:
    """Brown rectangular subject with a horn wedge on a dry tan background."""
    img = _noise_background(gen, (205, 185, 130))
    yy, xx = np.mgrid[0:64, 0:64]
    x0, y0 = int(gen.uniform(10, 22)), int(gen.uniform(22, 34))
    bw, bh = int(gen.uniform(24, 34)), int(gen.uniform(14, 20))
    body = (xx >= x0) & (xx < x0 + bw) & (yy >= y0) & (yy < y0 + bh)
    img[body] = np.array((122, 82, 58)) + gen.uniform(-8, 8, size=(int(body.sum()), 3))
    horn = (xx >= x0 + bw) & (xx < x0 + bw + 6) & (np.abs(yy - y0 - 3) <= (x0 + bw + 6 - xx))
    img[horn] = (230, 225, 210)
    return np.clip(img, 0, 255).astype(np.uint8)


def write_desk_corpus(root: Path, per_class: int = 40) -> None:
    gen = np.random.default_rng(4242)
    for name, painter in (("Elephant", elephant_image), ("Rhino", rhino_image)):
        cdir = root / name
        cdir.mkdir(parents=True)
        for i in range(per_class):
            Image.fromarray(painter(gen)).save(cdir / f"img_{i:03d}.png")


def run_prep_pipeline(corpus: Path, out: Path, folds: int = 3) -> None:
    """Drive the preparation pipeline through its public command line."""
    result = subprocess.run(
        [
            sys.executable, "-m", "wildprep",
            "run-all", str(corpus), str(out),
            "--seed", "7", "--jobs", "4", "--folds", str(folds),
        ],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stderr


@pytest.fixture(scope="session")
def desk_dataset(tmp_path_factory) -> PreparedDataset:
    base = tmp_path_factory.mktemp("desk")
    write_desk_corpus(base / "corpus")
    run_prep_pipeline(base / "corpus", base / "prepared")
    return load_manifest(base / "prepared" / "manifest.jsonl")


def trimmed(dataset: PreparedDataset, per_split: dict[str, int]) -> PreparedDataset:
    """A smaller view of the dataset for fast unit tests (balanced classes)."""
    picked = []
    for split, limit in per_split.items():
        for name in dataset.class_names:
            chosen = [
                r for r in dataset.split_records(split) if r.class_name == name
            ][:limit]
            picked.extend(chosen)
    return PreparedDataset(root=dataset.root, seed=dataset.seed, records=picked)
