"""Raw images to model-ready crops: pluggable person detection,
low-resolution filtering, and the canonical 224x224 input block.

Detectors are plugins behind a tiny interface; the production detector
(a Mask-RCNN-style tool) is an external concern.  Two built-ins ship:
a metadata stub that returns the synthetic generator's true figure box,
and a whole-image pass-through for ingested photos.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

import numpy as np
from PIL import Image

from .errors import ConfigError, DetectorError, SchemaViolation
from .schema import ImageRecord

INPUT_SIZE = 224
PAD_GRAY = 128

Box = tuple[int, int, int, int]


@dataclass(frozen=True)
class PersonCrop:
    parent_image_id: str
    crop_index: int
    bounding_box: Box
    pixels: np.ndarray

    def __post_init__(self):
        x, y, w, h = self.bounding_box
        if w < 1 or h < 1:
            raise SchemaViolation("crop box must have positive size")


class DetectorPlugin(Protocol):
    name: str
    reentrant: bool

    def detect(self, image: ImageRecord) -> list[tuple[Box, float]]: ...


class MetadataBoxDetector:
    """Stub detector returning the generator-recorded figure box."""

    name = "synthetic-metadata"
    reentrant = True

    def __init__(self, figure_boxes: Mapping[str, Box]):
        self._boxes = dict(figure_boxes)

    def detect(self, image: ImageRecord) -> list[tuple[Box, float]]:
        box = self._boxes.get(image.image_id)
        if box is None:
            return []
        x, y, w, h = box
        x = max(0, x)
        y = max(0, y)
        w = min(w, image.width - x)
        h = min(h, image.height - y)
        return [((x, y, w, h), 1.0)]


class WholeImageDetector:
    """Pass-through: the whole image is one person crop."""

    name = "whole-image"
    reentrant = True

    def detect(self, image: ImageRecord) -> list[tuple[Box, float]]:
        return [((0, 0, image.width, image.height), 1.0)]


_DETECTOR_FACTORIES = {
    "whole-image": lambda: WholeImageDetector(),
}


def detector_by_name(name: str, figure_boxes: Mapping[str, Box] | None = None):
    if name == "synthetic-metadata":
        return MetadataBoxDetector(figure_boxes or {})
    try:
        return _DETECTOR_FACTORIES[name]()
    except KeyError:
        raise ConfigError(f"unknown detector plugin {name!r}") from None


def extract_persons(
    image: ImageRecord, detector: DetectorPlugin, min_confidence: float
) -> list[PersonCrop]:
    """One crop per detection at or above min_confidence.

    Crops are ordered by descending confidence (stable for ties) and
    indexed in that order.  An empty list means "no person found"; the
    caller decides whether to fall back to a whole-image crop.
    """
    if not 0.0 <= min_confidence <= 1.0:
        raise ConfigError("min_confidence must lie in [0, 1]")
    try:
        detections = detector.detect(image)
    except Exception as exc:  # noqa: BLE001 - plugin boundary
        raise DetectorError(detector.name, str(exc)) from exc

    for (x, y, w, h), conf in detections:
        if not 0.0 <= conf <= 1.0:
            raise DetectorError(detector.name, f"confidence {conf} outside [0, 1]")
        if x < 0 or y < 0 or w < 1 or h < 1 or x + w > image.width or y + h > image.height:
            raise DetectorError(detector.name, f"box {(x, y, w, h)} outside image bounds")

    kept = [d for d in detections if d[1] >= min_confidence]
    kept.sort(key=lambda d: -d[1])
    crops = []
    for i, ((x, y, w, h), _conf) in enumerate(kept):
        crops.append(
            PersonCrop(
                parent_image_id=image.image_id,
                crop_index=i,
                bounding_box=(x, y, w, h),
                pixels=np.ascontiguousarray(image.pixels[y : y + h, x : x + w]),
            )
        )
    return crops


@dataclass(frozen=True)
class DiscardedRecord:
    record: ImageRecord
    reasons: tuple[str, ...]


def filter_low_resolution(
    records: Sequence[ImageRecord],
    min_width: int = 64,
    min_height: int = 64,
    min_bytes: int = 5120,
) -> tuple[list[ImageRecord], list[DiscardedRecord]]:
    """Partition records; a record is discarded iff any threshold fails."""
    kept: list[ImageRecord] = []
    discarded: list[DiscardedRecord] = []
    for rec in records:
        reasons = []
        if rec.width < min_width:
            reasons.append(f"width {rec.width} < {min_width}")
        if rec.height < min_height:
            reasons.append(f"height {rec.height} < {min_height}")
        if rec.byte_size < min_bytes:
            reasons.append(f"byte_size {rec.byte_size} < {min_bytes}")
        if reasons:
            discarded.append(DiscardedRecord(record=rec, reasons=tuple(reasons)))
        else:
            kept.append(rec)
    return kept, discarded


def pad_to_square(pixels: np.ndarray) -> np.ndarray:
    """Center the image on a mid-gray square canvas."""
    h, w = pixels.shape[:2]
    side = max(h, w)
    if h == w:
        return pixels
    canvas = np.full((side, side, 3), PAD_GRAY, dtype=np.uint8)
    y0 = (side - h) // 2
    x0 = (side - w) // 2
    canvas[y0 : y0 + h, x0 : x0 + w] = pixels
    return canvas


def resize_normalize(source: PersonCrop | ImageRecord) -> np.ndarray:
    """Canonical model input: 224x224x3 float32 in [0, 1].

    Aspect mismatch is handled by center-pad-then-scale (mid-gray pad),
    which preserves clothing regions near image edges.
    """
    return resize_uint8(source).astype(np.float32) / 255.0


def resize_uint8(source: PersonCrop | ImageRecord) -> np.ndarray:
    """The uint8 stage of resize_normalize (u8/255 == resize_normalize)."""
    pixels = source.pixels
    if pixels.shape[0] < 1 or pixels.shape[1] < 1 or pixels.size == 0:
        raise SchemaViolation("cannot resize an empty image")
    square = pad_to_square(pixels)
    if square.shape[0] == INPUT_SIZE:
        return square.copy()
    im = Image.fromarray(square).resize((INPUT_SIZE, INPUT_SIZE), Image.BILINEAR)
    return np.asarray(im, dtype=np.uint8)
