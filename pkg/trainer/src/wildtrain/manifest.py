"""Reader for the prepared-dataset file contract.

The preparation pipeline emits a directory containing ``manifest.jsonl``
(a JSON-lines file: one header line, then one record per line) and one
PNG per record at ``<ClassName>/<id>.png``. That file contract is the
only coupling between the preparation side and this trainer, so this
module parses it directly and owns no other dependency on the producer.

Record keys, in order: id, source_path, processed_path, class,
class_index, provenance, parent_id, chain, split, fold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

SCHEMA = "wildprep-manifest/1"


class ManifestFormatError(Exception):
    """The manifest file is missing, malformed, or incomplete."""


@dataclass(frozen=True)
class Record:
    id: str
    processed_path: str | None
    class_name: str
    class_index: int
    provenance: str
    split: str
    fold: int | None


@dataclass
class PreparedDataset:
    """A parsed manifest plus the directory its image paths resolve against."""

    root: Path
    seed: int
    records: list[Record]

    @property
    def class_names(self) -> list[str]:
        """Present classes in class-index order; defines the label space."""
        pairs = sorted({(r.class_index, r.class_name) for r in self.records})
        return [name for _, name in pairs]

    def dense_label(self, record: Record) -> int:
        """Label id within the manifest's own class space."""
        return self.class_names.index(record.class_name)

    def split_records(self, split: str) -> list[Record]:
        return [r for r in self.records if r.split == split]

    def fold_values(self) -> list[int]:
        return sorted({r.fold for r in self.records if r.fold is not None})

    def image_path(self, record: Record) -> Path:
        if record.processed_path is None:
            raise ManifestFormatError(f"record {record.id} has no processed image")
        return self.root / record.processed_path


def load_manifest(path: str | Path) -> PreparedDataset:
    p = Path(path)
    if not p.is_file():
        raise ManifestFormatError(f"manifest not found: {p}")
    lines = p.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ManifestFormatError(f"{p}: empty manifest")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ManifestFormatError(f"{p}:1: malformed header: {exc}") from exc
    if not isinstance(header, dict) or header.get("schema") != SCHEMA:
        raise ManifestFormatError(f"{p}:1: expected a {SCHEMA} header")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            obj = json.loads(line)
            records.append(
                Record(
                    id=obj["id"],
                    processed_path=obj.get("processed_path"),
                    class_name=obj["class"],
                    class_index=obj["class_index"],
                    provenance=obj["provenance"],
                    split=obj.get("split", "unassigned"),
                    fold=obj.get("fold"),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ManifestFormatError(f"{p}:{lineno}: malformed record: {exc}") from exc
    if not records:
        raise ManifestFormatError(f"{p}: manifest has no records")
    return PreparedDataset(root=p.parent, seed=int(header.get("seed", 0)), records=records)


def load_images(
    dataset: PreparedDataset, records: list[Record], input_size: int
) -> tuple[np.ndarray, np.ndarray]:
    """Load the records' PNGs as float32 arrays plus dense integer labels.

    Images whose stored size differs from ``input_size`` are resized
    bilinearly on load.
    """
    xs = np.empty((len(records), input_size, input_size, 3), dtype=np.float32)
    ys = np.empty(len(records), dtype=np.int64)
    for i, rec in enumerate(records):
        with Image.open(dataset.image_path(rec)) as im:
            rgb = im.convert("RGB")
            if rgb.size != (input_size, input_size):
                rgb = rgb.resize((input_size, input_size), Image.BILINEAR)
            xs[i] = np.asarray(rgb, dtype=np.float32)
        ys[i] = dataset.dense_label(rec)
    return xs, ys
