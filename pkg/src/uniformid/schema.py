"""Closed taxonomies and label/profile containers shared by every module.

The two enums below are the single source of truth for clothing items and
merged color classes.  Member order is fixed and load-bearing: probability
vectors, serialized files and tie-breaking all use it.  Serialization is
always by member *name*, never ordinal, so code reorderings cannot corrupt
stored data (and tests pin the order anyway).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import SchemaViolation

SCHEMA_VERSION = "uniformid.v1"


class ClothingItem(Enum):
    SHIRT = 0
    TROUSERS = 1
    OUTER_COAT = 2
    JUMPER = 3
    DRESS = 4
    TIE = 5


class ColorClass(Enum):
    RED_BROWN = 0
    YELLOW_ORANGE = 1
    GREEN = 2
    BLUE_PURPLE = 3
    WHITE = 4
    BLACK_GREY = 5
    NO_COLOR = 6


ITEMS: tuple[ClothingItem, ...] = tuple(ClothingItem)
COLORS: tuple[ColorClass, ...] = tuple(ColorClass)
NUM_ITEMS = len(ITEMS)
NUM_COLORS = len(COLORS)

# Normalization slack for externally produced probability vectors.
PROB_TOL = 1e-6


@dataclass(frozen=True)
class AttributeLabel:
    """Total assignment of one ColorClass per ClothingItem.

    NO_COLOR means the item is absent from the image.  ``textures`` is a
    reserved, currently uninterpreted extension slot (per item, optional
    free-form token) carried through serialization untouched.
    """

    colors: tuple[ColorClass, ...]
    textures: tuple[Optional[str], ...] = field(default=(None,) * NUM_ITEMS)

    def __post_init__(self):
        if len(self.colors) != NUM_ITEMS or not all(
            isinstance(c, ColorClass) for c in self.colors
        ):
            raise SchemaViolation(
                f"label must assign one color to each of the {NUM_ITEMS} items"
            )
        if len(self.textures) != NUM_ITEMS:
            raise SchemaViolation("textures slot must have one entry per item")

    @classmethod
    def from_mapping(cls, mapping: Mapping[ClothingItem, ColorClass]) -> "AttributeLabel":
        missing = [it.name for it in ITEMS if it not in mapping]
        if missing:
            raise SchemaViolation(f"label missing items: {', '.join(missing)}")
        extra = [k for k in mapping if not isinstance(k, ClothingItem)]
        if extra:
            raise SchemaViolation(f"label has non-item keys: {extra!r}")
        return cls(colors=tuple(mapping[it] for it in ITEMS))

    def color(self, item: ClothingItem) -> ColorClass:
        return self.colors[item.value]

    def as_dict(self) -> dict[ClothingItem, ColorClass]:
        return {it: self.colors[it.value] for it in ITEMS}

    def replace(self, item: ClothingItem, color: ColorClass) -> "AttributeLabel":
        colors = list(self.colors)
        colors[item.value] = color
        return AttributeLabel(colors=tuple(colors), textures=self.textures)


@dataclass(frozen=True)
class AttributeDistribution:
    """Per-item probability vector over the 7 color classes.

    ``probs`` has shape (6, 7): row order is ClothingItem, column order is
    ColorClass.  Rows must sum to 1 within PROB_TOL.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.shape != (NUM_ITEMS, NUM_COLORS):
            raise SchemaViolation(
                f"distribution must be {NUM_ITEMS}x{NUM_COLORS}, got {p.shape}"
            )
        if np.any(p < -PROB_TOL) or np.any(p > 1 + PROB_TOL):
            raise SchemaViolation("distribution entries must lie in [0, 1]")
        sums = p.sum(axis=1)
        bad = np.abs(sums - 1.0) > PROB_TOL
        if np.any(bad):
            names = [ITEMS[i].name for i in np.nonzero(bad)[0]]
            raise SchemaViolation(
                f"distribution rows must sum to 1 within {PROB_TOL}: {', '.join(names)}"
            )
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_mapping(
        cls, mapping: Mapping[ClothingItem, Sequence[float]]
    ) -> "AttributeDistribution":
        missing = [it.name for it in ITEMS if it not in mapping]
        if missing:
            raise SchemaViolation(f"distribution missing items: {', '.join(missing)}")
        rows = []
        for it in ITEMS:
            row = np.asarray(mapping[it], dtype=np.float64)
            if row.shape != (NUM_COLORS,):
                raise SchemaViolation(
                    f"{it.name}: expected {NUM_COLORS} probabilities, got {row.shape}"
                )
            rows.append(row)
        return cls(probs=np.stack(rows))

    def vector(self, item: ClothingItem) -> np.ndarray:
        return self.probs[item.value]

    def __eq__(self, other) -> bool:
        if not isinstance(other, AttributeDistribution):
            return NotImplemented
        return np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())


def label_to_onehot_distribution(label: AttributeLabel) -> AttributeDistribution:
    """One-hot distribution: probability 1 on each item's labeled class."""
    if not isinstance(label, AttributeLabel):
        raise SchemaViolation("expected an AttributeLabel")
    p = np.zeros((NUM_ITEMS, NUM_COLORS), dtype=np.float64)
    for it in ITEMS:
        p[it.value, label.color(it).value] = 1.0
    return AttributeDistribution(probs=p)


def distribution_argmax(dist: AttributeDistribution) -> AttributeLabel:
    """Hard decision per item; ties go to the lowest ColorClass ordinal."""
    if not isinstance(dist, AttributeDistribution):
        raise SchemaViolation("expected an AttributeDistribution")
    # np.argmax returns the first maximal index, which is the lowest ordinal.
    idx = np.argmax(dist.probs, axis=1)
    return AttributeLabel(colors=tuple(COLORS[i] for i in idx))


class ImageSource(Enum):
    SYNTHETIC = 0
    INGESTED = 1


@dataclass(frozen=True)
class GroundTruth:
    uniform_flag: bool
    label: AttributeLabel


@dataclass(frozen=True)
class ImageRecord:
    """An image plus provenance and optional ground truth.

    ``pixels`` is HxWx3 uint8 RGB and is frozen after construction.
    """

    image_id: str
    pixels: np.ndarray
    byte_size: int
    source: ImageSource
    school_id: Optional[str] = None
    ground_truth: Optional[GroundTruth] = None

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3 or px.dtype != np.uint8:
            raise SchemaViolation("pixels must be HxWx3 uint8")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise SchemaViolation("image must be at least 1x1")
        if self.source is ImageSource.SYNTHETIC and self.ground_truth is None:
            raise SchemaViolation("synthetic records must carry ground truth")
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])


@dataclass(frozen=True)
class SchoolProfile:
    """One school's uniform signature: one or more label variants."""

    school_id: str
    display_name: str
    region_code: str
    variants: tuple[AttributeLabel, ...]

    def __post_init__(self):
        if not self.school_id or any(ch.isspace() for ch in self.school_id):
            raise SchemaViolation("school_id must be non-empty with no whitespace")
        if any(ch.isspace() for ch in self.region_code) or not self.region_code:
            raise SchemaViolation("region_code must be non-empty with no whitespace")
        if "\n" in self.display_name:
            raise SchemaViolation("display_name must not contain newlines")
        if not self.variants:
            raise SchemaViolation(f"school {self.school_id}: variants must be non-empty")


@dataclass(frozen=True)
class ValidationFinding:
    code: str
    school_id: Optional[str]
    message: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[ValidationFinding, ...]

    @property
    def ok(self) -> bool:
        return not self.findings


def validate_registry(profiles: Iterable) -> ValidationReport:
    """Report structural problems in a would-be registry. Never raises."""
    findings: list[ValidationFinding] = []
    seen: dict[str, int] = {}
    for i, prof in enumerate(profiles):
        if not isinstance(prof, SchoolProfile):
            # Tolerate raw dict-shaped entries so pre-construction data can
            # be linted; anything else is reported, not thrown.
            findings.append(
                ValidationFinding(
                    code="malformed-profile",
                    school_id=None,
                    message=f"entry {i} is not a SchoolProfile",
                )
            )
            continue
        if prof.school_id in seen:
            findings.append(
                ValidationFinding(
                    code="duplicate-id",
                    school_id=prof.school_id,
                    message=f"school_id {prof.school_id!r} appears more than once",
                )
            )
        seen[prof.school_id] = i
        if not prof.variants:
            findings.append(
                ValidationFinding(
                    code="empty-variants",
                    school_id=prof.school_id,
                    message="no uniform variants",
                )
            )
        for v in prof.variants:
            if not isinstance(v, AttributeLabel):
                findings.append(
                    ValidationFinding(
                        code="malformed-label",
                        school_id=prof.school_id,
                        message="variant is not an AttributeLabel",
                    )
                )
    return ValidationReport(findings=tuple(findings))


@dataclass(frozen=True)
class SchoolRegistry:
    """Validated, digest-addressed collection of school profiles."""

    profiles: tuple[SchoolProfile, ...]

    def __post_init__(self):
        report = validate_registry(self.profiles)
        if not report.ok:
            first = report.findings[0]
            raise SchemaViolation(
                f"invalid registry ({len(report.findings)} findings; first: "
                f"{first.code} {first.message})"
            )

    @property
    def digest(self) -> str:
        from . import textio  # local import: textio depends on schema

        return hashlib.sha256(textio.encode_registry(self).encode()).hexdigest()

    def by_id(self, school_id: str) -> SchoolProfile:
        for p in self.profiles:
            if p.school_id == school_id:
                return p
        raise KeyError(school_id)

    @property
    def school_ids(self) -> tuple[str, ...]:
        return tuple(p.school_id for p in self.profiles)
