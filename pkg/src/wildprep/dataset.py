"""Corpus ingestion, class balancing, splits, folds, and the manifest ledger.

The manifest is the pipeline's single source of truth: one record per
sample carrying its provenance (original file or synthesized from a
parent by an augmentation chain), its class, and its split/fold
assignment. It round-trips losslessly through a JSON-lines file whose
first line is a header with the pipeline seed, creation timestamp, and
config digest.

Leakage rule: synthesized records always follow their parent across the
train/test split and across folds. Both planners therefore work on
*families* (an original plus all records synthesized from it) as atomic
units.
"""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from PIL import Image

from .augment import AugmentChain, AugmentPolicy, apply_chain, sample_chain
from .config import PipelineConfig
from .errors import ManifestError, WildprepError
from .imaging import load_image, resize, save_image
from .segmentation import KMeansConfig, segment_image

__all__ = [
    "CLASS_NAMES",
    "class_index",
    "SampleRecord",
    "DatasetManifest",
    "FoldPlan",
    "ingest",
    "balance",
    "stratified_split",
    "kfold_plan",
    "apply_fold_plan",
    "write_manifest",
    "read_manifest",
    "preprocess_all",
]

logger = logging.getLogger("wildprep")

# The ten supported classes, in index order (the label space is fixed).
CLASS_NAMES = (
    "Cheetah",
    "Chimpanzee",
    "Elephant",
    "Fox",
    "Jaguars",
    "Lion",
    "Orangutan",
    "Panda",
    "Panthers",
    "Rhino",
)
_CLASS_INDEX = {name: i for i, name in enumerate(CLASS_NAMES)}

ORIGINAL = "original"
SYNTHESIZED = "synthesized"
_SPLITS = ("train", "test", "unassigned")
_IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png")

_MANIFEST_SCHEMA = "wildprep-manifest/1"

# Purpose constants keep the RNG streams of the three seeded stages apart.
_BALANCE_STREAM = 1
_SPLIT_STREAM = 2
_FOLD_STREAM = 3


def class_index(name: str) -> int:
    """Index of a canonical class name (case-sensitive)."""
    try:
        return _CLASS_INDEX[name]
    except KeyError:
        raise ManifestError(
            f"unknown class {name!r}; valid names: {', '.join(CLASS_NAMES)}"
        ) from None


@dataclass(frozen=True)
class SampleRecord:
    id: str
    source_path: str
    processed_path: str | None
    class_name: str
    class_index: int
    provenance: str
    parent_id: str | None
    chain: tuple[str, ...] | None
    split: str
    fold: int | None

    def __post_init__(self) -> None:
        if self.provenance not in (ORIGINAL, SYNTHESIZED):
            raise ManifestError(f"record {self.id}: bad provenance {self.provenance!r}")
        if self.provenance == SYNTHESIZED and (self.parent_id is None or not self.chain):
            raise ManifestError(
                f"record {self.id}: synthesized records need parent_id and chain"
            )
        if self.provenance == ORIGINAL and (self.parent_id is not None or self.chain):
            raise ManifestError(
                f"record {self.id}: original records carry no parent_id or chain"
            )
        if self.split not in _SPLITS:
            raise ManifestError(f"record {self.id}: bad split {self.split!r}")
        if _CLASS_INDEX.get(self.class_name) != self.class_index:
            raise ManifestError(
                f"record {self.id}: class {self.class_name!r} does not map to "
                f"index {self.class_index}"
            )

    def to_json_obj(self) -> dict:
        return {
            "id": self.id,
            "source_path": self.source_path,
            "processed_path": self.processed_path,
            "class": self.class_name,
            "class_index": self.class_index,
            "provenance": self.provenance,
            "parent_id": self.parent_id,
            "chain": list(self.chain) if self.chain is not None else None,
            "split": self.split,
            "fold": self.fold,
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "SampleRecord":
        chain = obj.get("chain")
        return SampleRecord(
            id=obj["id"],
            source_path=obj["source_path"],
            processed_path=obj.get("processed_path"),
            class_name=obj["class"],
            class_index=obj["class_index"],
            provenance=obj["provenance"],
            parent_id=obj.get("parent_id"),
            chain=tuple(chain) if chain is not None else None,
            split=obj.get("split", "unassigned"),
            fold=obj.get("fold"),
        )


@dataclass
class DatasetManifest:
    records: list[SampleRecord]
    seed: int
    created: str
    config_digest: str

    def validate(self) -> None:
        ids = set()
        for rec in self.records:
            if rec.id in ids:
                raise ManifestError(f"duplicate record id: {rec.id}")
            ids.add(rec.id)
        for rec in self.records:
            if rec.provenance == SYNTHESIZED and rec.parent_id not in ids:
                raise ManifestError(
                    f"record {rec.id}: parent {rec.parent_id!r} not in manifest"
                )

    def class_counts(self, provenance: str | None = None) -> dict[str, int]:
        counts: dict[str, int] = {}
        for rec in self.records:
            if provenance is not None and rec.provenance != provenance:
                continue
            counts[rec.class_name] = counts.get(rec.class_name, 0) + 1
        return counts


@dataclass(frozen=True)
class FoldPlan:
    """Record id → fold index over k folds; children share their parent's fold."""

    k: int
    assignment: dict[str, int]


def created_timestamp() -> str:
    """UTC creation stamp; honors SOURCE_DATE_EPOCH for reproducible runs."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    seconds = int(epoch) if epoch else int(time.time())
    return datetime.fromtimestamp(seconds, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _is_decodable(path: Path) -> bool:
    try:
        with Image.open(path) as im:
            im.verify()
        return True
    except Exception:
        return False


def ingest(root_dir: str | Path, seed: int = 0, config_digest: str = "") -> DatasetManifest:
    """Scan a class-per-directory corpus into a manifest of original records.

    Records are ordered by (class index, file name) so repeated runs yield
    identical manifests. Directories that are not a canonical class name
    are reported and skipped, as are undecodable files.
    """
    root = Path(root_dir)
    if not root.is_dir():
        raise ManifestError(f"corpus root not found: {root}")

    for sub in sorted(p.name for p in root.iterdir() if p.is_dir()):
        if sub not in _CLASS_INDEX:
            logger.warning("skipping directory %r: not one of the class names", sub)

    records: list[SampleRecord] = []
    for name in CLASS_NAMES:
        cdir = root / name
        if not cdir.is_dir():
            continue
        files = sorted(
            p for p in cdir.iterdir()
            if p.is_file() and p.suffix.lower() in _IMAGE_SUFFIXES
        )
        kept = 0
        for path in files:
            if not _is_decodable(path):
                logger.warning("skipping undecodable file: %s", path)
                continue
            records.append(
                SampleRecord(
                    id=f"{name.lower()}_{kept:04d}",
                    source_path=str(path),
                    processed_path=None,
                    class_name=name,
                    class_index=_CLASS_INDEX[name],
                    provenance=ORIGINAL,
                    parent_id=None,
                    chain=None,
                    split="unassigned",
                    fold=None,
                )
            )
            kept += 1
        if kept == 0:
            logger.warning("class directory has no decodable images: %s", cdir)

    if not records:
        raise ManifestError(f"no samples found under {root}")
    manifest = DatasetManifest(
        records=records,
        seed=seed,
        created=created_timestamp(),
        config_digest=config_digest,
    )
    manifest.validate()
    return manifest


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *key])))


def balance(
    manifest: DatasetManifest, seed: int, policy: AugmentPolicy | None = None
) -> DatasetManifest:
    """Oversample every class up to the largest original class count.

    Appends synthesized records whose parents are drawn round-robin over
    the class's originals in id order and whose chains come from seeded
    draws, so the result is a pure function of (manifest, seed). A manifest
    that is already balanced comes back unchanged.
    """
    policy = policy or AugmentPolicy()
    by_class: dict[int, list[SampleRecord]] = {}
    for rec in manifest.records:
        by_class.setdefault(rec.class_index, []).append(rec)

    originals = {
        ci: sorted((r for r in recs if r.provenance == ORIGINAL), key=lambda r: r.id)
        for ci, recs in by_class.items()
    }
    for ci, parents in originals.items():
        if not parents:
            raise ManifestError(
                f"class {CLASS_NAMES[ci]} has no original records to synthesize from"
            )
    target = max(len(parents) for parents in originals.values())

    new_records = list(manifest.records)
    for ci in sorted(by_class):
        parents = originals[ci]
        have = len(by_class[ci])
        existing_syn = have - len(parents)
        name = CLASS_NAMES[ci].lower()
        for t in range(target - have):
            j = existing_syn + t
            parent = parents[j % len(parents)]
            chain = sample_chain(
                _rng(seed, _BALANCE_STREAM, ci, j), policy, seed_tag=f"{seed}:{ci}:{j}"
            )
            new_records.append(
                SampleRecord(
                    id=f"{name}_syn{j:04d}",
                    source_path=parent.source_path,
                    processed_path=None,
                    class_name=parent.class_name,
                    class_index=ci,
                    provenance=SYNTHESIZED,
                    parent_id=parent.id,
                    chain=tuple(chain.encode()),
                    split=parent.split,
                    fold=parent.fold,
                )
            )

    out = replace_records(manifest, new_records)
    out.validate()
    return out


def replace_records(manifest: DatasetManifest, records: list[SampleRecord]) -> DatasetManifest:
    return DatasetManifest(
        records=records,
        seed=manifest.seed,
        created=manifest.created,
        config_digest=manifest.config_digest,
    )


def _families(records: list[SampleRecord]) -> dict[str, list[SampleRecord]]:
    """Group records into (original + its synthesized children) families."""
    fams: dict[str, list[SampleRecord]] = {}
    for rec in records:
        fams.setdefault(rec.parent_id or rec.id, []).append(rec)
    return fams


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def _pick_exact_two_sizes(
    shuffled: list[tuple[str, int]], target: int
) -> set[str] | None:
    """Exact family selection when at most two distinct family sizes exist
    (always the case for round-robin-balanced manifests). Prefers hitting
    the target exactly, then target−1, then target+1."""
    sizes = sorted({s for _, s in shuffled})
    if len(sizes) > 2:
        return None
    lo = sizes[0]
    hi = sizes[-1]
    lo_ids = [fid for fid, s in shuffled if s == lo]
    hi_ids = [fid for fid, s in shuffled if s == hi] if len(sizes) == 2 else []
    n_total = len(shuffled)
    for t in (target, target - 1, target + 1):
        if t < 1:
            continue
        max_hi = min(len(hi_ids), t // hi) if hi_ids else 0
        for a in range(max_hi + 1):
            rem = t - a * hi
            if rem < 0 or rem % lo != 0:
                continue
            b = rem // lo
            if b > len(lo_ids):
                continue
            if not 1 <= a + b <= n_total - 1:
                continue
            return set(hi_ids[:a]) | set(lo_ids[:b])
    return None


def _pick_greedy(shuffled: list[tuple[str, int]], target: int) -> set[str]:
    """Greedy fill plus a one-swap repair; keeps both sides non-empty."""
    chosen: list[tuple[str, int]] = []
    total = 0
    for fid, size in shuffled:
        if total + size <= target and len(chosen) < len(shuffled) - 1:
            chosen.append((fid, size))
            total += size
    if not chosen:
        chosen.append(shuffled[0])
        total = shuffled[0][1]
    gap = target - total
    if gap != 0:
        chosen_ids = {fid for fid, _ in chosen}
        rest = [(fid, size) for fid, size in shuffled if fid not in chosen_ids]
        for cid, csize in chosen:
            for rid_, rsize in rest:
                if rsize - csize == gap:
                    chosen_ids.discard(cid)
                    chosen_ids.add(rid_)
                    return chosen_ids
        return chosen_ids
    return {fid for fid, _ in chosen}


def stratified_split(
    manifest: DatasetManifest, test_fraction: float, seed: int
) -> DatasetManifest:
    """Assign every record to train or test, stratified per class.

    Per class, ⌊count·test_fraction⌉ records go to the test side, chosen by
    a seeded shuffle of whole families so no original ever straddles the
    split from its synthesized children. Family granularity caps how
    exactly the target can be met; for manifests balanced by this pipeline
    (family sizes differ by at most one within a class) the target is met
    within ±1.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ManifestError(f"test_fraction must be in (0, 1), got {test_fraction}")
    by_class: dict[int, list[SampleRecord]] = {}
    for rec in manifest.records:
        by_class.setdefault(rec.class_index, []).append(rec)

    test_ids: set[str] = set()
    for ci in sorted(by_class):
        recs = by_class[ci]
        count = len(recs)
        if count < 2:
            raise ManifestError(
                f"class {CLASS_NAMES[ci]} has {count} record(s); cannot split"
            )
        target = _round_half_up(count * test_fraction)
        if target == 0 or target == count:
            raise ManifestError(
                f"class {CLASS_NAMES[ci]} is too small to yield both sides at "
                f"test_fraction={test_fraction}"
            )
        fams = _families(recs)
        if len(fams) < 2:
            raise ManifestError(
                f"class {CLASS_NAMES[ci]} has a single family; the leakage rule "
                f"cannot yield both sides"
            )
        family_sizes = [(fid, len(members)) for fid, members in sorted(fams.items())]
        rng = _rng(seed, _SPLIT_STREAM, ci)
        order = rng.permutation(len(family_sizes))
        shuffled = [family_sizes[i] for i in order]
        picked = _pick_exact_two_sizes(shuffled, target)
        if picked is None:
            picked = _pick_greedy(shuffled, target)
        for fid in picked:
            test_ids.update(r.id for r in fams[fid])

    new_records = [
        replace(rec, split="test" if rec.id in test_ids else "train")
        for rec in manifest.records
    ]
    return replace_records(manifest, new_records)


def kfold_plan(manifest: DatasetManifest, k: int = 5, seed: int = 0) -> FoldPlan:
    """Stratified k-fold partition over original records.

    Families are dealt round-robin to folds (larger families first, seeded
    shuffle within equal sizes, per-class rotating start), which keeps
    per-class original counts within ±1 of each other across folds.
    Synthesized records inherit their parent's fold.
    """
    if k < 2:
        raise ManifestError(f"fold count must be >= 2, got {k}")
    by_class: dict[int, list[SampleRecord]] = {}
    for rec in manifest.records:
        by_class.setdefault(rec.class_index, []).append(rec)

    assignment: dict[str, int] = {}
    for ci in sorted(by_class):
        fams = _families(by_class[ci])
        n_orig = sum(
            1 for members in fams.values() for r in members if r.provenance == ORIGINAL
        )
        if n_orig < k:
            raise ManifestError(
                f"class {CLASS_NAMES[ci]} has {n_orig} original records; needs >= {k}"
            )
        rng = _rng(seed, _FOLD_STREAM, ci)
        by_size: dict[int, list[str]] = {}
        for fid, members in sorted(fams.items()):
            by_size.setdefault(len(members), []).append(fid)
        dealing_order: list[str] = []
        for size in sorted(by_size, reverse=True):
            group = by_size[size]
            order = rng.permutation(len(group))
            dealing_order.extend(group[i] for i in order)
        start = ci % k
        for pos, fid in enumerate(dealing_order):
            fold = (start + pos) % k
            for rec in fams[fid]:
                assignment[rec.id] = fold
    return FoldPlan(k=k, assignment=assignment)


def apply_fold_plan(manifest: DatasetManifest, plan: FoldPlan) -> DatasetManifest:
    new_records = [
        replace(rec, fold=plan.assignment.get(rec.id, rec.fold))
        for rec in manifest.records
    ]
    return replace_records(manifest, new_records)


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    """Write the manifest as UTF-8 JSON lines (header line, then one record
    per line, keys in fixed order, LF endings)."""
    manifest.validate()
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "schema": _MANIFEST_SCHEMA,
        "seed": manifest.seed,
        "created": manifest.created,
        "config_digest": manifest.config_digest,
    }
    with open(p, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(header, ensure_ascii=False) + "\n")
        for rec in manifest.records:
            fh.write(json.dumps(rec.to_json_obj(), ensure_ascii=False) + "\n")


def read_manifest(path: str | Path) -> DatasetManifest:
    p = Path(path)
    if not p.is_file():
        raise ManifestError(f"manifest not found: {p}")
    lines = p.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ManifestError(f"{p}: empty manifest")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{p}:1: malformed header: {exc}") from exc
    if not isinstance(header, dict) or header.get("schema") != _MANIFEST_SCHEMA:
        raise ManifestError(f"{p}:1: missing or unsupported manifest header")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            raise ManifestError(f"{p}:{lineno}: blank line in manifest")
        try:
            obj = json.loads(line)
            records.append(SampleRecord.from_json_obj(obj))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ManifestError(f"{p}:{lineno}: malformed record: {exc}") from exc
    manifest = DatasetManifest(
        records=records,
        seed=header.get("seed", 0),
        created=header.get("created", ""),
        config_digest=header.get("config_digest", ""),
    )
    manifest.validate()
    return manifest


def _relative_output(rec: SampleRecord) -> str:
    return f"{rec.class_name}/{rec.id}.png"


def _process_source(task: tuple) -> list[tuple[str, str | None, str | None]]:
    """Worker: segment + resize one source image once, then emit every record
    that derives from it (the original and/or its chained children)."""
    source, entries, out_dir, cfg = task
    try:
        img = load_image(source)
        seg = segment_image(
            img,
            KMeansConfig(k=cfg.k, max_iters=cfg.max_iters, tol=cfg.tol, seed=cfg.seed),
            cfg.denoise_window,
        )
        base = resize(seg, cfg.target_size, cfg.target_size)
    except WildprepError as exc:
        return [(rid, None, str(exc)) for rid, _chain, _rel in entries]
    results: list[tuple[str, str | None, str | None]] = []
    for rid, chain_enc, rel in entries:
        try:
            out = base
            if chain_enc is not None:
                out = apply_chain(base, AugmentChain.decode(list(chain_enc)))
            save_image(out, Path(out_dir) / rel)
            results.append((rid, rel, None))
        except WildprepError as exc:
            results.append((rid, None, str(exc)))
    return results


def preprocess_all(
    manifest: DatasetManifest,
    config: PipelineConfig,
    out_dir: str | Path,
    jobs: int = 1,
) -> tuple[DatasetManifest, list[tuple[str, str]]]:
    """Run load → segment → resize (→ chain for synthesized records) → save
    for every record, writing ``<out_dir>/<ClassName>/<id>.png``.

    Work fans out over a bounded process pool, one task per distinct source
    image, and results merge back in record order, so the output is
    independent of ``jobs``. Per-record failures are collected and returned
    as (record id, reason) pairs instead of aborting the run; only a fully
    failed run raises. ``processed_path`` entries are relative to
    ``out_dir`` (where the pipeline also writes the manifest).
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ManifestError(f"cannot create output directory {out}: {exc}") from exc

    groups: dict[str, list[tuple[str, tuple[str, ...] | None, str]]] = {}
    for rec in manifest.records:
        groups.setdefault(rec.source_path, []).append(
            (rec.id, rec.chain, _relative_output(rec))
        )
    tasks = [
        (source, groups[source], str(out), config) for source in sorted(groups)
    ]

    if jobs <= 1:
        batches = [_process_source(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            batches = list(pool.map(_process_source, tasks, chunksize=1))

    outcome: dict[str, tuple[str | None, str | None]] = {}
    for batch in batches:
        for rid, rel, err in batch:
            outcome[rid] = (rel, err)

    failures: list[tuple[str, str]] = []
    new_records = []
    for rec in manifest.records:
        rel, err = outcome[rec.id]
        if err is not None:
            failures.append((rec.id, err))
            new_records.append(rec)
        else:
            new_records.append(replace(rec, processed_path=rel))
    if failures and len(failures) == len(manifest.records):
        raise ManifestError(
            f"all {len(failures)} records failed preprocessing; first: "
            f"{failures[0][0]}: {failures[0][1]}"
        )
    return replace_records(manifest, new_records), failures
