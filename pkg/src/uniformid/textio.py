"""Canonical text serialization for labels, distributions and registries.

Every document is line-oriented UTF-8 with the header::

    #uniformid.v1 kind=<kind>

Field names are enum *names* (never ordinals).  Floats are written with
Python ``repr`` so ``decode(encode(x)) == x`` bit-exactly.  An optional
per-item texture token is reserved in label syntax (``SHIRT: WHITE
texture=striped`` in documents, ``SHIRT=WHITE~striped`` inline) and is
carried through untouched; nothing interprets it yet.

Document kinds defined here: ``attribute_label``, ``attribute_distribution``,
``school_registry``.  Other modules reuse :func:`header` /
:func:`parse_header` for their own kinds so all files share one versioned
format family.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .errors import SchemaViolation
from .schema import (
    ITEMS,
    NUM_COLORS,
    SCHEMA_VERSION,
    AttributeDistribution,
    AttributeLabel,
    ClothingItem,
    ColorClass,
    SchoolProfile,
    SchoolRegistry,
)


def header(kind: str) -> str:
    return f"#{SCHEMA_VERSION} kind={kind}"


def parse_header(line: str, expected_kind: str) -> None:
    want = header(expected_kind)
    if line != want:
        raise SchemaViolation(f"bad document header {line!r}, expected {want!r}")


def split_document(text: str, expected_kind: str) -> list[str]:
    lines = text.split("\n")
    if not lines:
        raise SchemaViolation("empty document")
    parse_header(lines[0], expected_kind)
    # A single trailing newline is canonical; keep interior blanks out.
    body = [ln for ln in lines[1:] if ln != ""]
    return body


def _color_by_name(name: str) -> ColorClass:
    try:
        return ColorClass[name]
    except KeyError:
        raise SchemaViolation(f"unknown color class {name!r}") from None


def _item_by_name(name: str) -> ClothingItem:
    try:
        return ClothingItem[name]
    except KeyError:
        raise SchemaViolation(f"unknown clothing item {name!r}") from None


# -- attribute labels ---------------------------------------------------------


def encode_label(label: AttributeLabel) -> str:
    lines = [header("attribute_label")]
    for it in ITEMS:
        tex = label.textures[it.value]
        suffix = f" texture={tex}" if tex is not None else ""
        lines.append(f"{it.name}: {label.color(it).name}{suffix}")
    return "\n".join(lines) + "\n"


def decode_label(text: str) -> AttributeLabel:
    body = split_document(text, "attribute_label")
    colors: dict[ClothingItem, ColorClass] = {}
    textures: dict[ClothingItem, str] = {}
    for ln in body:
        key, _, value = ln.partition(": ")
        item = _item_by_name(key)
        if item in colors:
            raise SchemaViolation(f"duplicate item {item.name}")
        parts = value.split(" ")
        colors[item] = _color_by_name(parts[0])
        for extra in parts[1:]:
            if extra.startswith("texture="):
                textures[item] = extra[len("texture=") :]
            else:
                raise SchemaViolation(f"unknown label field {extra!r}")
    label = AttributeLabel.from_mapping(colors)
    if textures:
        tex = tuple(textures.get(it) for it in ITEMS)
        label = AttributeLabel(colors=label.colors, textures=tex)
    return label


def format_label_inline(label: AttributeLabel) -> str:
    """Single-token-per-item form used inside registry and manifest lines."""
    parts = []
    for it in ITEMS:
        tex = label.textures[it.value]
        suffix = f"~{tex}" if tex is not None else ""
        parts.append(f"{it.name}={label.color(it).name}{suffix}")
    return " ".join(parts)


def parse_label_inline(text: str) -> AttributeLabel:
    colors: dict[ClothingItem, ColorClass] = {}
    textures: dict[ClothingItem, str] = {}
    for token in text.split(" "):
        if not token:
            continue
        key, sep, value = token.partition("=")
        if not sep:
            raise SchemaViolation(f"bad label token {token!r}")
        item = _item_by_name(key)
        color_name, tsep, tex = value.partition("~")
        colors[item] = _color_by_name(color_name)
        if tsep:
            textures[item] = tex
    label = AttributeLabel.from_mapping(colors)
    if textures:
        label = AttributeLabel(
            colors=label.colors, textures=tuple(textures.get(it) for it in ITEMS)
        )
    return label


# -- attribute distributions --------------------------------------------------


def encode_distribution(dist: AttributeDistribution) -> str:
    lines = [header("attribute_distribution")]
    for it in ITEMS:
        row = " ".join(repr(float(v)) for v in dist.vector(it))
        lines.append(f"{it.name}: {row}")
    return "\n".join(lines) + "\n"


def decode_distribution(text: str) -> AttributeDistribution:
    body = split_document(text, "attribute_distribution")
    rows: dict[ClothingItem, np.ndarray] = {}
    for ln in body:
        key, _, value = ln.partition(": ")
        item = _item_by_name(key)
        parts = value.split(" ")
        if len(parts) != NUM_COLORS:
            raise SchemaViolation(
                f"{item.name}: expected {NUM_COLORS} probabilities, got {len(parts)}"
            )
        try:
            rows[item] = np.array([float(p) for p in parts], dtype=np.float64)
        except ValueError:
            raise SchemaViolation(f"{item.name}: non-numeric probability") from None
    return AttributeDistribution.from_mapping(rows)


# -- school registries --------------------------------------------------------


def encode_registry(registry: SchoolRegistry) -> str:
    lines = [header("school_registry")]
    for prof in registry.profiles:
        lines.append(f"school: {prof.school_id}")
        lines.append(f"name: {prof.display_name}")
        lines.append(f"region: {prof.region_code}")
        for v in prof.variants:
            lines.append(f"variant: {format_label_inline(v)}")
    return "\n".join(lines) + "\n"


def decode_registry(text: str) -> SchoolRegistry:
    body = split_document(text, "school_registry")
    profiles: list[SchoolProfile] = []
    cur_id: Optional[str] = None
    cur_name = ""
    cur_region = ""
    cur_variants: list[AttributeLabel] = []

    def flush():
        nonlocal cur_id, cur_name, cur_region, cur_variants
        if cur_id is not None:
            profiles.append(
                SchoolProfile(
                    school_id=cur_id,
                    display_name=cur_name,
                    region_code=cur_region,
                    variants=tuple(cur_variants),
                )
            )
        cur_id, cur_name, cur_region, cur_variants = None, "", "", []

    for ln in body:
        key, sep, value = ln.partition(": ")
        if not sep:
            raise SchemaViolation(f"bad registry line {ln!r}")
        if key == "school":
            flush()
            cur_id = value
        elif key == "name":
            cur_name = value
        elif key == "region":
            cur_region = value
        elif key == "variant":
            cur_variants.append(parse_label_inline(value))
        else:
            raise SchemaViolation(f"unknown registry field {key!r}")
    flush()
    return SchoolRegistry(profiles=tuple(profiles))
