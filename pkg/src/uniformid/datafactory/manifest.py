"""Dataset persistence: manifest file plus one PNG per record.

Manifest lines are tab-separated:

    image_id<TAB>path<TAB>source<TAB>school<TAB>uniform<TAB>label

``school`` / ``uniform`` / ``label`` use ``-`` when absent.  Split files
share the same format family (one id per line after the header).
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .. import textio
from ..errors import DataError, SchemaViolation
from ..schema import GroundTruth, ImageRecord, ImageSource
from .splits import DatasetSplit

_MANIFEST_KIND = "dataset_manifest"
_SPLIT_KIND = "dataset_split"


def save_dataset(directory: str | Path, records: list[ImageRecord]) -> Path:
    root = Path(directory)
    (root / "images").mkdir(parents=True, exist_ok=True)
    lines = [textio.header(_MANIFEST_KIND)]
    for rec in records:
        rel = f"images/{rec.image_id}.png"
        Image.fromarray(rec.pixels).save(root / rel)
        gt = rec.ground_truth
        fields = [
            rec.image_id,
            rel,
            rec.source.name,
            rec.school_id if rec.school_id else "-",
            ("true" if gt.uniform_flag else "false") if gt else "-",
            textio.format_label_inline(gt.label) if gt else "-",
        ]
        lines.append("\t".join(fields))
    manifest = root / "manifest.tsv"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest


def load_dataset(directory: str | Path) -> list[ImageRecord]:
    root = Path(directory)
    manifest = root / "manifest.tsv"
    if not manifest.is_file():
        raise DataError(f"no manifest at {manifest}")
    body = textio.split_document(manifest.read_text(), _MANIFEST_KIND)
    records: list[ImageRecord] = []
    for ln in body:
        fields = ln.split("\t")
        if len(fields) != 6:
            raise SchemaViolation(f"bad manifest line: {ln!r}")
        image_id, rel, source, school, uniform, label = fields
        path = root / rel
        with Image.open(path) as im:
            pixels = np.asarray(im.convert("RGB"), dtype=np.uint8)
        gt: Optional[GroundTruth] = None
        if uniform != "-":
            gt = GroundTruth(
                uniform_flag=uniform == "true",
                label=textio.parse_label_inline(label),
            )
        records.append(
            ImageRecord(
                image_id=image_id,
                pixels=pixels,
                byte_size=path.stat().st_size if source == "INGESTED" else int(pixels.nbytes),
                source=ImageSource[source],
                school_id=None if school == "-" else school,
                ground_truth=gt,
            )
        )
    return records


_CROPS_KIND = "crop_manifest"


def save_crop_manifest(path: str | Path, crops) -> None:
    """Record person crops (parent id, index, box) next to a dataset."""
    lines = [textio.header(_CROPS_KIND)]
    for crop in crops:
        x, y, w, h = crop.bounding_box
        lines.append(f"{crop.parent_image_id}\t{crop.crop_index}\t{x}\t{y}\t{w}\t{h}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_crop_manifest(path: str | Path) -> list[tuple[str, int, tuple[int, int, int, int]]]:
    body = textio.split_document(Path(path).read_text(), _CROPS_KIND)
    out = []
    for ln in body:
        parent, idx, x, y, w, h = ln.split("\t")
        out.append((parent, int(idx), (int(x), int(y), int(w), int(h))))
    return out


_BOXES_KIND = "figure_boxes"


def save_figure_boxes(directory: str | Path, boxes: dict[str, tuple[int, int, int, int]]) -> None:
    """Persist generator figure boxes so the stub detector works off disk."""
    lines = [textio.header(_BOXES_KIND)]
    for image_id in sorted(boxes):
        x, y, w, h = boxes[image_id]
        lines.append(f"{image_id}\t{x}\t{y}\t{w}\t{h}")
    (Path(directory) / "figure_boxes.tsv").write_text("\n".join(lines) + "\n")


def load_figure_boxes(directory: str | Path) -> dict[str, tuple[int, int, int, int]]:
    path = Path(directory) / "figure_boxes.tsv"
    if not path.exists():
        return {}
    body = textio.split_document(path.read_text(), _BOXES_KIND)
    out = {}
    for ln in body:
        image_id, x, y, w, h = ln.split("\t")
        out[image_id] = (int(x), int(y), int(w), int(h))
    return out


def save_split(path: str | Path, split: DatasetSplit) -> None:
    lines = [textio.header(_SPLIT_KIND)]
    lines.append(f"fold: {split.fold_id}")
    lines.append(f"held_out_school: {split.held_out_school or '-'}")
    for i in split.train:
        lines.append(f"train: {i}")
    for i in split.test:
        lines.append(f"test: {i}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_split(path: str | Path) -> DatasetSplit:
    body = textio.split_document(Path(path).read_text(), _SPLIT_KIND)
    fold_id = ""
    held: Optional[str] = None
    train: list[str] = []
    test: list[str] = []
    for ln in body:
        key, sep, value = ln.partition(": ")
        if not sep:
            raise SchemaViolation(f"bad split line: {ln!r}")
        if key == "fold":
            fold_id = value
        elif key == "held_out_school":
            held = None if value == "-" else value
        elif key == "train":
            train.append(value)
        elif key == "test":
            test.append(value)
        else:
            raise SchemaViolation(f"unknown split field {key!r}")
    return DatasetSplit(
        train=tuple(train), test=tuple(test), fold_id=fold_id, held_out_school=held
    )
