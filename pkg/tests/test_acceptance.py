"""Acceptance suite: one test per release criterion, one printed line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the PASS lines;
any assertion failure marks the corresponding criterion FAIL.
"""

import time

import numpy as np
import pytest

from wildprep.augment import flip_h, flip_v, rotate_right_angle, zoom
from wildprep.cli import main
from wildprep.dataset import (
    CLASS_NAMES,
    apply_fold_plan,
    balance,
    kfold_plan,
    read_manifest,
    stratified_split,
)
from wildprep.imaging import RasterImage
from wildprep.segmentation import KMeansConfig, inertia, kmeans_fit, segment_image

from .conftest import random_image
from .oracles import best_two_partition
from .test_dataset import leak_pairs, make_corpus, synthetic_manifest
from .test_segmentation import planted_two_cluster_image


def report(name: str, ok: bool = True) -> None:
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}")
    assert ok


class TestAcceptance:
    def test_kmeans_matches_exhaustive_partition_optimum(self, rng):
        """50 tiny k=2 instances: Lloyd's final inertia equals the optimum
        found by enumerating all assignments, within 1e-9."""
        worst = 0.0
        for case in range(50):
            img = planted_two_cluster_image(rng)
            best = best_two_partition([tuple(p) for p in img.pixels.reshape(-1, 3)])
            model, labels = kmeans_fit(img, KMeansConfig(k=2, seed=0))
            gap = inertia(img, model, labels) - best
            assert gap <= 1e-9, f"instance {case}: gap {gap}"
            worst = max(worst, gap)
        report(f"kmeans-oracle-equivalence (50 instances, worst gap {worst:.2e})")

    def test_lloyd_inertia_never_increases(self, rng):
        """100 random 32x32 images, k=3: the objective is non-increasing at
        every recorded iteration; zero violations allowed."""
        violations = 0
        for case in range(100):
            img = random_image(rng, 32, 32)
            history: list[float] = []
            kmeans_fit(img, KMeansConfig(k=3, seed=case), inertia_history=history)
            violations += sum(1 for a, b in zip(history, history[1:]) if b > a + 1e-9)
        assert violations == 0
        report("lloyd-monotonicity (100 images, 0 violations)")

    def test_segmentation_contract_over_synthetic_corpus(self, rng):
        """200 synthetic images: every segment_image output preserves the
        input dimensions and carries at most 3 distinct colors."""
        cfg = KMeansConfig(k=3, seed=5)
        for case in range(200):
            w = int(rng.integers(8, 24))
            h = int(rng.integers(8, 24))
            img = random_image(rng, w, h)
            out = segment_image(img, cfg)
            assert (out.width, out.height) == (w, h), f"image {case}"
            distinct = len(np.unique(out.pixels.reshape(-1, 3), axis=0))
            assert distinct <= 3, f"image {case}: {distinct} colors"
        report("segmentation-contract (200 images, <=3 colors, dims preserved)")

    def test_augmentation_algebra_over_1000_images(self, rng):
        """flip involutions, rotate-90 order 4, rot180 = flip_h∘flip_v, and
        zoom(1.0) identity over 1000 random images; zero violations."""
        for case in range(1000):
            w = int(rng.integers(1, 13))
            h = int(rng.integers(1, 13))
            img = random_image(rng, w, h)
            assert flip_h(flip_h(img)) == img, f"flip_h case {case}"
            assert flip_v(flip_v(img)) == img, f"flip_v case {case}"
            turned = img
            for _ in range(4):
                turned = rotate_right_angle(turned, 1)
            assert turned == img, f"rot90 case {case}"
            assert rotate_right_angle(img, 2) == flip_h(flip_v(img)), f"rot180 case {case}"
            assert zoom(img, 1.0) == img, f"zoom case {case}"
        report("augmentation-algebra (1000 images, 0 violations)")

    def test_balance_split_fold_laws_on_skewed_manifest(self):
        """Counts {10, 20, ..., 100}: balance reaches 100 everywhere, the
        split is stratified within ±1, 5 folds partition with per-class
        spread <= 1, and no parent/child pair straddles anything."""
        counts = {name: 10 * (i + 1) for i, name in enumerate(CLASS_NAMES)}
        manifest = balance(synthetic_manifest(counts), seed=101)
        histogram = manifest.class_counts()
        assert set(histogram.values()) == {100}, histogram

        split = stratified_split(manifest, 0.2, seed=101)
        for name in CLASS_NAMES:
            n_test = sum(
                1 for r in split.records if r.class_name == name and r.split == "test"
            )
            assert abs(n_test - 20) <= 1, (name, n_test)
        assert leak_pairs(split) == []

        plan = kfold_plan(split, k=5, seed=101)
        ids = {r.id for r in split.records}
        assert set(plan.assignment) == ids
        folds = [set() for _ in range(5)]
        for rid, fold in plan.assignment.items():
            folds[fold].add(rid)
        assert set().union(*folds) == ids
        assert sum(len(f) for f in folds) == len(ids)
        for name in CLASS_NAMES:
            for provenance in ("original", None):
                per_fold = [
                    sum(
                        1
                        for r in split.records
                        if r.class_name == name
                        and plan.assignment[r.id] == fold
                        and (provenance is None or r.provenance == provenance)
                    )
                    for fold in range(5)
                ]
                assert max(per_fold) - min(per_fold) <= 1, (name, provenance, per_fold)
        assert leak_pairs(apply_fold_plan(split, plan)) == []
        report("balance-split-fold-laws (10 classes, all laws hold)")

    def test_run_all_byte_identical_across_runs_and_jobs(self, tmp_path, monkeypatch):
        """Two full run-all executions with the same seed, at different
        --jobs values, produce byte-identical manifests and PNG trees."""
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
        make_corpus(tmp_path / "corpus", {"Cheetah": 10, "Lion": 12, "Rhino": 8})
        for out, jobs in (("r1", "1"), ("r2", "4"), ("r3", "2")):
            code = main([
                "run-all", str(tmp_path / "corpus"), str(tmp_path / out),
                "--seed", "77", "--jobs", jobs,
            ])
            assert code == 0
        reference = sorted(
            p.relative_to(tmp_path / "r1")
            for p in (tmp_path / "r1").rglob("*")
            if p.is_file()
        )
        assert (tmp_path / "r1" / "manifest.jsonl") in [
            tmp_path / "r1" / p for p in reference
        ]
        for other in ("r2", "r3"):
            files = sorted(
                p.relative_to(tmp_path / other)
                for p in (tmp_path / other).rglob("*")
                if p.is_file()
            )
            assert files == reference
            for rel in reference:
                assert (tmp_path / "r1" / rel).read_bytes() == (
                    tmp_path / other / rel
                ).read_bytes(), rel
        report(f"determinism ({len(reference)} files byte-identical across 3 runs)")

    def test_hundred_image_corpus_under_sixty_seconds(self, tmp_path):
        """Engineering target: a 100-image corpus completes run-all in under
        60 s with a 4-worker pool."""
        counts = {name: 10 for name in CLASS_NAMES}
        make_corpus(tmp_path / "corpus", counts, size=(96, 96))
        start = time.monotonic()
        code = main([
            "run-all", str(tmp_path / "corpus"), str(tmp_path / "out"),
            "--seed", "5", "--jobs", "4",
        ])
        elapsed = time.monotonic() - start
        assert code == 0
        manifest = read_manifest(tmp_path / "out" / "manifest.jsonl")
        assert len(manifest.records) == 100
        assert elapsed < 60.0, f"took {elapsed:.1f}s"
        report(f"engineering-target (100 images in {elapsed:.1f}s < 60s)")
