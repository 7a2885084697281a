"""Local-folder image ingestion (content-hash identities, idempotent)."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..errors import DataError
from ..schema import ImageRecord, ImageSource


@dataclass(frozen=True)
class RejectedFile:
    path: str
    reason: str


@dataclass
class IngestResult:
    records: list[ImageRecord]
    rejections: list[RejectedFile]


def ingest_folder(path: str | Path) -> IngestResult:
    """One record per decodable image file directly inside ``path``.

    Undecodable files are reported, not fatal.  image_id is derived from
    the file content hash, so re-ingesting a folder yields identical ids.
    """
    root = Path(path)
    if not root.is_dir():
        raise DataError(f"not a readable directory: {root}")

    records: list[ImageRecord] = []
    rejections: list[RejectedFile] = []
    for child in sorted(root.iterdir()):
        if not child.is_file():
            continue
        try:
            raw = child.read_bytes()
        except OSError as exc:
            rejections.append(RejectedFile(path=str(child), reason=f"unreadable: {exc}"))
            continue
        try:
            with Image.open(child) as im:
                pixels = np.asarray(im.convert("RGB"), dtype=np.uint8)
        except (UnidentifiedImageError, OSError, ValueError) as exc:
            rejections.append(RejectedFile(path=str(child), reason=f"undecodable: {exc}"))
            continue
        image_id = "ing-" + hashlib.sha256(raw).hexdigest()[:16]
        records.append(
            ImageRecord(
                image_id=image_id,
                pixels=pixels,
                byte_size=len(raw),
                source=ImageSource.INGESTED,
            )
        )
    return IngestResult(records=records, rejections=rejections)
