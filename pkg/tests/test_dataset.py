"""Ingestion, balancing, splitting, folding, and manifest round-trips."""

from collections import Counter

import numpy as np
import pytest
from PIL import Image

from wildprep.dataset import (
    CLASS_NAMES,
    DatasetManifest,
    SampleRecord,
    apply_fold_plan,
    balance,
    class_index,
    ingest,
    kfold_plan,
    read_manifest,
    stratified_split,
    write_manifest,
)
from wildprep.errors import ManifestError


def make_corpus(root, class_counts: dict[str, int], size=(16, 16)) -> None:
    for name, count in class_counts.items():
        cdir = root / name
        cdir.mkdir(parents=True)
        for i in range(count):
            gen = np.random.default_rng(hash((name, i)) % (2**32))
            arr = gen.integers(0, 256, size=(size[1], size[0], 3), dtype=np.uint8)
            Image.fromarray(arr).save(cdir / f"img_{i:03d}.png")


def synthetic_manifest(class_counts: dict[str, int]) -> DatasetManifest:
    """In-memory manifest of originals only; no files behind it."""
    records = []
    for name, count in class_counts.items():
        ci = class_index(name)
        for i in range(count):
            records.append(
                SampleRecord(
                    id=f"{name.lower()}_{i:04d}",
                    source_path=f"/corpus/{name}/img_{i:03d}.png",
                    processed_path=None,
                    class_name=name,
                    class_index=ci,
                    provenance="original",
                    parent_id=None,
                    chain=None,
                    split="unassigned",
                    fold=None,
                )
            )
    return DatasetManifest(records=records, seed=0, created="", config_digest="")


def leak_pairs(manifest) -> list[tuple[str, str]]:
    """Exhaustive scan: (parent, child) pairs whose split or fold disagree."""
    by_id = {r.id: r for r in manifest.records}
    bad = []
    for rec in manifest.records:
        if rec.parent_id is None:
            continue
        parent = by_id[rec.parent_id]
        if rec.split != parent.split or rec.fold != parent.fold:
            bad.append((parent.id, rec.id))
    return bad


class TestClassIndex:
    def test_paper_fig1_mapping(self):
        assert class_index("Cheetah") == 0
        assert class_index("Chimpanzee") == 1
        assert class_index("Elephant") == 2
        assert class_index("Fox") == 3
        assert class_index("Jaguars") == 4
        assert class_index("Lion") == 5
        assert class_index("Orangutan") == 6
        assert class_index("Panda") == 7
        assert class_index("Panthers") == 8
        assert class_index("Rhino") == 9

    def test_bijection(self):
        assert len(CLASS_NAMES) == 10
        assert sorted(class_index(n) for n in CLASS_NAMES) == list(range(10))

    def test_unknown_name_lists_valid_ones(self):
        with pytest.raises(ManifestError, match="Cheetah.*Rhino"):
            class_index("Tiger")

    def test_case_sensitive(self):
        with pytest.raises(ManifestError):
            class_index("cheetah")


class TestIngest:
    def test_three_class_tree(self, tmp_path):
        make_corpus(tmp_path, {"Cheetah": 2, "Lion": 2, "Rhino": 2})
        manifest = ingest(tmp_path)
        assert len(manifest.records) == 6
        assert [r.id for r in manifest.records] == [
            "cheetah_0000", "cheetah_0001",
            "lion_0000", "lion_0001",
            "rhino_0000", "rhino_0001",
        ]
        assert all(r.provenance == "original" for r in manifest.records)

    def test_deterministic_bytes_across_runs(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
        make_corpus(tmp_path / "corpus", {"Fox": 2, "Panda": 3})
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        write_manifest(ingest(tmp_path / "corpus"), a)
        write_manifest(ingest(tmp_path / "corpus"), b)
        assert a.read_bytes() == b.read_bytes()

    def test_unknown_directory_skipped(self, tmp_path, caplog):
        make_corpus(tmp_path, {"Lion": 1})
        (tmp_path / "Tiger").mkdir()
        with caplog.at_level("WARNING", logger="wildprep"):
            manifest = ingest(tmp_path)
        assert len(manifest.records) == 1
        assert any("Tiger" in r.message for r in caplog.records)

    def test_undecodable_file_skipped(self, tmp_path, caplog):
        make_corpus(tmp_path, {"Lion": 2})
        (tmp_path / "Lion" / "broken.png").write_bytes(b"nope")
        with caplog.at_level("WARNING", logger="wildprep"):
            manifest = ingest(tmp_path)
        assert len(manifest.records) == 2

    def test_empty_root_is_an_error(self, tmp_path):
        (tmp_path / "corpus").mkdir()
        with pytest.raises(ManifestError, match="no samples"):
            ingest(tmp_path / "corpus")

    def test_missing_root_is_an_error(self, tmp_path):
        with pytest.raises(ManifestError, match="not found"):
            ingest(tmp_path / "absent")


class TestBalance:
    def test_five_three_five_becomes_all_fives(self):
        manifest = synthetic_manifest({"Cheetah": 5, "Lion": 3, "Rhino": 5})
        out = balance(manifest, seed=1)
        assert out.class_counts() == {"Cheetah": 5, "Lion": 3 + 2, "Rhino": 5}
        synth = [r for r in out.records if r.provenance == "synthesized"]
        assert len(synth) == 2
        assert all(r.class_name == "Lion" for r in synth)
        assert [r.parent_id for r in synth] == ["lion_0000", "lion_0001"]
        assert all(r.chain for r in synth)

    def test_already_balanced_is_a_fixed_point(self):
        manifest = synthetic_manifest({"Cheetah": 4, "Lion": 4})
        once = balance(manifest, seed=9)
        twice = balance(once, seed=9)
        assert once == twice
        assert once.records == manifest.records

    def test_skewed_ten_class_histogram(self):
        counts = {name: 10 * (i + 1) for i, name in enumerate(CLASS_NAMES)}
        manifest = synthetic_manifest(counts)
        out = balance(manifest, seed=3)
        histogram = Counter(r.class_name for r in out.records)
        assert set(histogram.values()) == {100}
        assert len(out.records) == 1000

    def test_round_robin_parent_rotation(self):
        manifest = synthetic_manifest({"Cheetah": 2, "Lion": 7})
        out = balance(manifest, seed=4)
        synth = [r for r in out.records if r.provenance == "synthesized"]
        assert [r.parent_id for r in synth] == [
            "cheetah_0000", "cheetah_0001", "cheetah_0000",
            "cheetah_0001", "cheetah_0000",
        ]

    def test_deterministic_given_seed(self):
        manifest = synthetic_manifest({"Cheetah": 3, "Lion": 6})
        assert balance(manifest, seed=5) == balance(manifest, seed=5)
        a = balance(manifest, seed=5)
        b = balance(manifest, seed=6)
        chains_a = [r.chain for r in a.records if r.chain]
        chains_b = [r.chain for r in b.records if r.chain]
        assert chains_a != chains_b


class TestStratifiedSplit:
    def test_hundred_per_class_gives_twenty_test(self):
        manifest = synthetic_manifest({"Cheetah": 100, "Lion": 100})
        out = stratified_split(manifest, 0.2, seed=0)
        per_class = Counter(
            (r.class_name, r.split) for r in out.records
        )
        assert per_class[("Cheetah", "test")] == 20
        assert per_class[("Lion", "test")] == 20
        assert per_class[("Cheetah", "train")] == 80

    def test_children_follow_parent(self):
        manifest = balance(synthetic_manifest({"Cheetah": 3, "Lion": 12}), seed=1)
        out = stratified_split(manifest, 0.25, seed=2)
        assert leak_pairs(out) == []
        # at least one synthesized record actually landed in test
        assert any(
            r.split == "test" and r.provenance == "synthesized" for r in out.records
        )

    def test_no_straddling_on_balanced_skew(self):
        counts = {name: 10 * (i + 1) for i, name in enumerate(CLASS_NAMES)}
        manifest = balance(synthetic_manifest(counts), seed=7)
        out = stratified_split(manifest, 0.2, seed=7)
        assert leak_pairs(out) == []
        per_class_test = Counter(
            r.class_name for r in out.records if r.split == "test"
        )
        for name in CLASS_NAMES:
            assert abs(per_class_test[name] - 20) <= 1, name

    def test_every_record_assigned(self):
        manifest = synthetic_manifest({"Cheetah": 10, "Lion": 10})
        out = stratified_split(manifest, 0.3, seed=1)
        assert all(r.split in ("train", "test") for r in out.records)

    def test_class_too_small(self):
        manifest = synthetic_manifest({"Cheetah": 2, "Lion": 10})
        with pytest.raises(ManifestError, match="too small"):
            stratified_split(manifest, 0.1, seed=0)

    def test_deterministic(self):
        manifest = synthetic_manifest({"Cheetah": 30, "Lion": 30})
        a = stratified_split(manifest, 0.2, seed=5)
        b = stratified_split(manifest, 0.2, seed=5)
        assert a == b


class TestKFold:
    def test_fifty_per_class_k5(self):
        manifest = synthetic_manifest({"Cheetah": 50, "Lion": 50})
        plan = kfold_plan(manifest, k=5, seed=0)
        per = Counter()
        for rec in manifest.records:
            per[(rec.class_name, plan.assignment[rec.id])] += 1
        for name in ("Cheetah", "Lion"):
            for fold in range(5):
                assert per[(name, fold)] == 10

    def test_partition_laws(self):
        manifest = balance(synthetic_manifest({"Cheetah": 10, "Lion": 25}), seed=2)
        plan = kfold_plan(manifest, k=5, seed=2)
        ids = {r.id for r in manifest.records}
        assert set(plan.assignment) == ids
        folds = [set() for _ in range(5)]
        for rid, fold in plan.assignment.items():
            folds[fold].add(rid)
        assert set().union(*folds) == ids
        for i in range(5):
            for j in range(i + 1, 5):
                assert not folds[i] & folds[j]

    def test_per_class_original_spread_within_one(self):
        counts = {name: 10 * (i + 1) for i, name in enumerate(CLASS_NAMES)}
        manifest = balance(synthetic_manifest(counts), seed=3)
        plan = kfold_plan(manifest, k=5, seed=3)
        by_id = {r.id: r for r in manifest.records}
        for name in CLASS_NAMES:
            fold_counts = Counter(
                plan.assignment[r.id]
                for r in manifest.records
                if r.class_name == name and r.provenance == "original"
            )
            values = [fold_counts.get(f, 0) for f in range(5)]
            assert max(values) - min(values) <= 1, name

    def test_children_inherit_parent_fold(self):
        manifest = balance(synthetic_manifest({"Cheetah": 5, "Lion": 20}), seed=4)
        plan = kfold_plan(manifest, k=5, seed=4)
        folded = apply_fold_plan(manifest, plan)
        assert leak_pairs(folded) == []

    def test_k_below_two_rejected(self):
        manifest = synthetic_manifest({"Cheetah": 10})
        with pytest.raises(ManifestError, match=">= 2"):
            kfold_plan(manifest, k=1, seed=0)

    def test_class_smaller_than_k_rejected(self):
        manifest = synthetic_manifest({"Cheetah": 3})
        with pytest.raises(ManifestError, match="needs >= 5"):
            kfold_plan(manifest, k=5, seed=0)


class TestManifestIO:
    def test_round_trip_identity(self, tmp_path):
        manifest = balance(synthetic_manifest({"Cheetah": 4, "Lion": 9}), seed=1)
        manifest = stratified_split(manifest, 0.25, seed=1)
        path = tmp_path / "m.jsonl"
        write_manifest(manifest, path)
        assert read_manifest(path) == manifest

    def test_truncated_final_line_reports_line_number(self, tmp_path):
        manifest = synthetic_manifest({"Cheetah": 3})
        path = tmp_path / "m.jsonl"
        write_manifest(manifest, path)
        text = path.read_text(encoding="utf-8")
        path.write_text(text[:-20], encoding="utf-8")
        with pytest.raises(ManifestError, match=r"m\.jsonl:4"):
            read_manifest(path)

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text('{"id": "x"}\n', encoding="utf-8")
        with pytest.raises(ManifestError, match="header"):
            read_manifest(path)

    def test_duplicate_ids_rejected(self):
        rec = synthetic_manifest({"Cheetah": 1}).records[0]
        manifest = DatasetManifest(
            records=[rec, rec], seed=0, created="", config_digest=""
        )
        with pytest.raises(ManifestError, match="duplicate"):
            manifest.validate()

    def test_same_seed_writes_identical_bytes(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
        make_corpus(tmp_path / "corpus", {"Cheetah": 3, "Lion": 5})
        paths = []
        for run in ("x", "y"):
            manifest = ingest(tmp_path / "corpus", seed=11)
            manifest = balance(manifest, seed=11)
            manifest = stratified_split(manifest, 0.2, seed=11)
            p = tmp_path / f"{run}.jsonl"
            write_manifest(manifest, p)
            paths.append(p)
        assert paths[0].read_bytes() == paths[1].read_bytes()


class TestRecordInvariants:
    def test_synthesized_requires_parent_and_chain(self):
        with pytest.raises(ManifestError, match="parent_id and chain"):
            SampleRecord(
                id="x", source_path="s", processed_path=None,
                class_name="Lion", class_index=5, provenance="synthesized",
                parent_id=None, chain=None, split="unassigned", fold=None,
            )

    def test_original_rejects_parent(self):
        with pytest.raises(ManifestError, match="no parent_id"):
            SampleRecord(
                id="x", source_path="s", processed_path=None,
                class_name="Lion", class_index=5, provenance="original",
                parent_id="y", chain=None, split="unassigned", fold=None,
            )

    def test_class_and_index_must_agree(self):
        with pytest.raises(ManifestError, match="does not map"):
            SampleRecord(
                id="x", source_path="s", processed_path=None,
                class_name="Lion", class_index=2, provenance="original",
                parent_id=None, chain=None, split="unassigned", fold=None,
            )
