"""Synthetic registry and dataset generation.

Figures are deliberately schematic: a head, disjoint flat-colored
rectangles for each clothing item, plain backgrounds for uniform shots
and cluttered ones for casual shots.  Every render records exact ground
truth plus per-item region boxes and the figure bounding box, so tests
can re-derive labels from pixels and the stub person detector can return
the true figure box.

Everything is a pure function of (config, seed): per-image RNG streams
are derived from the seed and image index, so regeneration is
byte-identical.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ..errors import CapacityError, ConfigError, DataError
from ..nn.net import derive_rng
from ..schema import (
    AttributeLabel,
    ClothingItem,
    ColorClass,
    GroundTruth,
    ImageRecord,
    ImageSource,
    SchoolProfile,
    SchoolRegistry,
)
from .palettes import ANCHORS, jitter_color

Rect = tuple[int, int, int, int]  # x, y, w, h


@dataclass(frozen=True)
class SyntheticConfig:
    seed: int = 1234
    num_schools: int = 10
    uniform_images_per_school: int = 100
    num_nonuniform_images: int = 1000
    render_size: tuple[int, int] = (224, 224)  # (H, W)
    hue_jitter: float = 12.0  # degrees
    brightness_jitter: float = 0.12  # fraction
    occlusion_prob: float = 0.1

    def __post_init__(self):
        if self.num_schools < 1:
            raise ConfigError("num_schools must be >= 1")
        if self.uniform_images_per_school < 0 or self.num_nonuniform_images < 0:
            raise ConfigError("image counts must be >= 0")
        if self.render_size[0] < 32 or self.render_size[1] < 32:
            raise ConfigError("render_size must be at least 32x32")
        if not 0.0 <= self.occlusion_prob <= 1.0:
            raise ConfigError("occlusion_prob must lie in [0, 1]")
        if self.hue_jitter < 0 or self.brightness_jitter < 0:
            raise ConfigError("jitter values must be >= 0")


@dataclass(frozen=True)
class RenderInfo:
    """Generator-side metadata for one image (not part of the record)."""

    figure_box: Rect
    regions: dict[ClothingItem, tuple[Rect, ...]]
    fills: dict[ClothingItem, tuple[int, int, int]]


@dataclass
class SyntheticDataset:
    records: list[ImageRecord]
    render_infos: dict[str, RenderInfo] = field(default_factory=dict)
    config: SyntheticConfig | None = None
    registry_digest: str = ""

    @property
    def content_digest(self) -> str:
        h = hashlib.sha256()
        for rec in self.records:
            h.update(rec.image_id.encode())
            h.update(rec.pixels.tobytes())
            gt = rec.ground_truth
            meta = f"{rec.source.name}|{rec.school_id}|{gt.uniform_flag if gt else None}"
            h.update(meta.encode())
        return h.hexdigest()


# -- school registry ----------------------------------------------------------

_REGIONS = ("LDN", "SE", "SW", "MID", "NW", "NE", "WAL", "SCO")

_NAME_FIRST = (
    "Oakwood", "Riverside", "St. Hilda's", "Northgate", "Elmfield", "Kingsbridge",
    "Harborview", "Ashcombe", "Marlowe", "Whitfield", "Granville", "Redford",
    "Clearwater", "Stonebrook", "Fairholme", "Westcliff", "Birchwood", "Hollyfield",
    "Thornbury", "Lakeside",
)
_NAME_SECOND = ("Primary", "High School", "Academy", "College", "School")

# Per-item color weights for sampling plausible uniform signatures.
_UNIFORM_WEIGHTS: dict[ClothingItem, dict[ColorClass, float]] = {
    ClothingItem.SHIRT: {
        ColorClass.WHITE: 4.0, ColorClass.BLUE_PURPLE: 2.0, ColorClass.YELLOW_ORANGE: 1.0,
        ColorClass.GREEN: 1.0, ColorClass.RED_BROWN: 1.0, ColorClass.BLACK_GREY: 0.3,
    },
    ClothingItem.TROUSERS: {
        ColorClass.BLACK_GREY: 4.0, ColorClass.BLUE_PURPLE: 2.0, ColorClass.GREEN: 1.0,
        ColorClass.RED_BROWN: 0.6, ColorClass.WHITE: 0.2, ColorClass.YELLOW_ORANGE: 0.1,
    },
    ClothingItem.OUTER_COAT: {
        ColorClass.BLUE_PURPLE: 2.0, ColorClass.GREEN: 2.0, ColorClass.RED_BROWN: 2.0,
        ColorClass.BLACK_GREY: 2.0, ColorClass.YELLOW_ORANGE: 0.5, ColorClass.WHITE: 0.2,
    },
    ClothingItem.JUMPER: {
        ColorClass.BLUE_PURPLE: 2.0, ColorClass.GREEN: 2.0, ColorClass.RED_BROWN: 2.0,
        ColorClass.BLACK_GREY: 2.0, ColorClass.YELLOW_ORANGE: 0.5, ColorClass.WHITE: 0.3,
    },
    ClothingItem.DRESS: {
        ColorClass.BLUE_PURPLE: 2.0, ColorClass.GREEN: 2.0, ColorClass.RED_BROWN: 2.0,
        ColorClass.BLACK_GREY: 1.0, ColorClass.YELLOW_ORANGE: 0.5, ColorClass.WHITE: 0.5,
    },
    ClothingItem.TIE: {
        ColorClass.RED_BROWN: 2.0, ColorClass.BLUE_PURPLE: 2.0, ColorClass.GREEN: 1.5,
        ColorClass.BLACK_GREY: 1.0, ColorClass.YELLOW_ORANGE: 1.0, ColorClass.WHITE: 0.2,
    },
}


def _weighted_color(rng: np.random.Generator, weights: dict[ColorClass, float]) -> ColorClass:
    colors = list(weights.keys())
    w = np.array([weights[c] for c in colors], dtype=np.float64)
    return colors[int(rng.choice(len(colors), p=w / w.sum()))]


def _sample_uniform_label(rng: np.random.Generator) -> AttributeLabel:
    """One plausible uniform signature.

    Layout constraints keep item regions disjoint: exactly one of
    trousers/dress, and a dress excludes a jumper.
    """
    colors: dict[ClothingItem, ColorClass] = {it: ColorClass.NO_COLOR for it in ClothingItem}
    colors[ClothingItem.SHIRT] = _weighted_color(rng, _UNIFORM_WEIGHTS[ClothingItem.SHIRT])
    wears_dress = rng.random() < 0.3
    if wears_dress:
        colors[ClothingItem.DRESS] = _weighted_color(rng, _UNIFORM_WEIGHTS[ClothingItem.DRESS])
    else:
        colors[ClothingItem.TROUSERS] = _weighted_color(rng, _UNIFORM_WEIGHTS[ClothingItem.TROUSERS])
        if rng.random() < 0.6:
            colors[ClothingItem.JUMPER] = _weighted_color(rng, _UNIFORM_WEIGHTS[ClothingItem.JUMPER])
    if rng.random() < 0.5:
        colors[ClothingItem.OUTER_COAT] = _weighted_color(rng, _UNIFORM_WEIGHTS[ClothingItem.OUTER_COAT])
    if rng.random() < 0.55:
        colors[ClothingItem.TIE] = _weighted_color(rng, _UNIFORM_WEIGHTS[ClothingItem.TIE])
    return AttributeLabel.from_mapping(colors)


def _sample_casual_label(rng: np.random.Generator) -> AttributeLabel:
    colors: dict[ClothingItem, ColorClass] = {it: ColorClass.NO_COLOR for it in ClothingItem}
    wearable = [c for c in ColorClass if c is not ColorClass.NO_COLOR]
    colors[ClothingItem.SHIRT] = wearable[int(rng.integers(len(wearable)))]
    if rng.random() < 0.15:
        colors[ClothingItem.DRESS] = wearable[int(rng.integers(len(wearable)))]
    else:
        colors[ClothingItem.TROUSERS] = wearable[int(rng.integers(len(wearable)))]
        if rng.random() < 0.35:
            colors[ClothingItem.JUMPER] = wearable[int(rng.integers(len(wearable)))]
    if rng.random() < 0.25:
        colors[ClothingItem.OUTER_COAT] = wearable[int(rng.integers(len(wearable)))]
    if rng.random() < 0.03:
        colors[ClothingItem.TIE] = wearable[int(rng.integers(len(wearable)))]
    return AttributeLabel.from_mapping(colors)


def generate_school_registry(config: SyntheticConfig) -> SchoolRegistry:
    """Deterministic registry with globally distinct uniform variants.

    Distinctness is stronger than required (no variant label is shared
    between any two schools, rather than merely no identical variant
    *sets*) so that an exact-match query always has one best school.
    """
    # Distinct signature space under the layout constraints:
    # shirt(6) x [dress(6) or trousers(6) x jumper(6+absent)] x coat(7) x tie(7).
    capacity = 6 * (6 + 6 * 7) * 7 * 7
    if config.num_schools > capacity:
        raise CapacityError(
            f"only {capacity} distinct uniform signatures exist; "
            f"cannot generate {config.num_schools} schools"
        )
    rng = derive_rng(config.seed, "registry")
    taken: set[tuple] = set()
    profiles: list[SchoolProfile] = []
    for i in range(config.num_schools):
        variants: list[AttributeLabel] = []
        n_variants = 2 if rng.random() < 0.35 else 1
        for _ in range(n_variants):
            for attempt in range(2000):
                label = _sample_uniform_label(rng)
                if label.colors not in taken:
                    taken.add(label.colors)
                    variants.append(label)
                    break
            else:
                raise CapacityError(
                    f"cannot find a distinct uniform variant for school {i + 1} "
                    f"of {config.num_schools}"
                )
        first = _NAME_FIRST[i % len(_NAME_FIRST)]
        second = _NAME_SECOND[(i // len(_NAME_FIRST)) % len(_NAME_SECOND)]
        suffix = f" {i // (len(_NAME_FIRST) * len(_NAME_SECOND)) + 1}" if i >= len(_NAME_FIRST) * len(_NAME_SECOND) else ""
        profiles.append(
            SchoolProfile(
                school_id=f"SCH-{i + 1:03d}",
                display_name=f"{first} {second}{suffix}",
                region_code=_REGIONS[i % len(_REGIONS)],
                variants=tuple(variants),
            )
        )
    return SchoolRegistry(profiles=tuple(profiles))


# -- rendering ----------------------------------------------------------------

_SKIN = (219, 180, 151)


def _fill(img: np.ndarray, rect: Rect, color: tuple[int, int, int]) -> None:
    x, y, w, h = rect
    img[y : y + h, x : x + w] = color


def _figure_rects(rng: np.random.Generator, H: int, W: int, label: AttributeLabel) -> tuple[
    dict[ClothingItem, tuple[Rect, ...]], Rect, dict[str, Rect]
]:
    """Disjoint per-item rectangles plus head/leg filler geometry."""

    def px(fx: float, of: int = 0) -> int:
        return int(round(fx * W)) + of

    def py(fy: float, of: int = 0) -> int:
        return int(round(fy * H)) + of

    # Whole-figure placement jitter; piece proportions are fixed.
    dx = int(rng.integers(-round(0.04 * W), round(0.04 * W) + 1))
    dy = int(rng.integers(-round(0.02 * H), round(0.02 * H) + 1))

    has = {it: label.color(it) is not ColorClass.NO_COLOR for it in ClothingItem}

    regions: dict[ClothingItem, tuple[Rect, ...]] = {}
    extras: dict[str, Rect] = {}

    head = (px(0.44, dx), py(0.08, dy), px(0.12), py(0.12))
    extras["head"] = head

    shirt_y, shirt_h = py(0.24, dy), py(0.13)
    shirt_x0, shirt_x1 = px(0.38, dx), px(0.62, dx)
    if has[ClothingItem.TIE]:
        tie_w = max(2, px(0.035))
        tie_x = px(0.5, dx) - tie_w // 2
        tie_h = shirt_h + py(0.09)
        if has[ClothingItem.DRESS]:
            # A dress fills the mid band; stop the tie above it.
            tie_h = min(tie_h, py(0.40, dy) - 1 - shirt_y)
        regions[ClothingItem.TIE] = ((tie_x, shirt_y, tie_w, tie_h),)
        if has[ClothingItem.SHIRT]:
            regions[ClothingItem.SHIRT] = (
                (shirt_x0, shirt_y, tie_x - shirt_x0, shirt_h),
                (tie_x + tie_w, shirt_y, shirt_x1 - tie_x - tie_w, shirt_h),
            )
    elif has[ClothingItem.SHIRT]:
        regions[ClothingItem.SHIRT] = ((shirt_x0, shirt_y, shirt_x1 - shirt_x0, shirt_h),)

    mid_y, mid_h = py(0.40, dy), py(0.17)
    if has[ClothingItem.DRESS]:
        regions[ClothingItem.DRESS] = ((px(0.36, dx), mid_y, px(0.28), py(0.30)),)
        extras["legs_skin"] = (px(0.42, dx), py(0.73, dy), px(0.16), py(0.17))
    else:
        if has[ClothingItem.JUMPER]:
            jx0 = px(0.38, dx)
            regions[ClothingItem.JUMPER] = ((jx0, mid_y, px(0.62, dx) - jx0, mid_h),)
        if has[ClothingItem.TROUSERS]:
            leg_y, leg_h = py(0.60, dy), py(0.30)
            regions[ClothingItem.TROUSERS] = (
                (px(0.40, dx), leg_y, px(0.075), leg_h),
                (px(0.525, dx), leg_y, px(0.075), leg_h),
            )

    if has[ClothingItem.OUTER_COAT]:
        coat_y, coat_h = py(0.24, dy), py(0.42)
        regions[ClothingItem.OUTER_COAT] = (
            (px(0.28, dx), coat_y, px(0.075), coat_h),
            (px(0.645, dx), coat_y, px(0.075), coat_h),
        )

    # Tie overlaps the jumper band visually; carve the jumper around it so
    # regions stay disjoint (mean-color ground truth depends on it).
    if has[ClothingItem.TIE] and ClothingItem.JUMPER in regions:
        (jx, jy, jw, jh) = regions[ClothingItem.JUMPER][0]
        (tx, ty, tw, th) = regions[ClothingItem.TIE][0]
        tie_bottom = ty + th
        if tie_bottom > jy:
            regions[ClothingItem.JUMPER] = (
                (jx, jy, tx - jx, jh),
                (tx + tw, jy, jx + jw - tx - tw, jh),
            )

    all_rects = [r for rs in regions.values() for r in rs] + [head]
    xs = [r[0] for r in all_rects]
    ys = [r[1] for r in all_rects]
    x2 = [r[0] + r[2] for r in all_rects]
    y2 = [r[1] + r[3] for r in all_rects]
    fig = (min(xs) - 2, min(ys) - 2, max(x2) - min(xs) + 4, max(y2) - min(ys) + 4)
    return regions, fig, extras


def _render_image(
    rng: np.random.Generator,
    config: SyntheticConfig,
    label: AttributeLabel,
    is_uniform: bool,
    anchor_of,  # (item, color) -> anchor rgb
) -> tuple[np.ndarray, RenderInfo]:
    H, W = config.render_size
    img = np.zeros((H, W, 3), dtype=np.uint8)

    if is_uniform:
        base = np.array((205, 205, 208), dtype=np.int16)
        tint = rng.integers(-6, 7, size=3)
        img[:, :] = np.clip(base + tint, 0, 255).astype(np.uint8)
    else:
        img[:, :] = tuple(int(v) for v in rng.integers(60, 220, size=3))
        for _ in range(int(rng.integers(6, 13))):
            w = int(rng.integers(W // 10, W // 2))
            h = int(rng.integers(H // 10, H // 2))
            x = int(rng.integers(0, W - w))
            y = int(rng.integers(0, H - h))
            img[y : y + h, x : x + w] = tuple(int(v) for v in rng.integers(0, 256, size=3))

    regions, figure_box, extras = _figure_rects(rng, H, W, label)

    _fill(img, extras["head"], _SKIN)
    if "legs_skin" in extras:
        _fill(img, extras["legs_skin"], _SKIN)

    fills: dict[ClothingItem, tuple[int, int, int]] = {}
    for item, rects in regions.items():
        color_class = label.color(item)
        anchor = anchor_of(item, color_class)
        fill = jitter_color(rng, anchor, color_class, config.hue_jitter, config.brightness_jitter)
        fills[item] = fill
        for rect in rects:
            _fill(img, rect, fill)

    if rng.random() < config.occlusion_prob:
        fx, fy, fw, fh = figure_box
        ow = max(4, int(0.3 * fw))
        oh = max(4, int(0.18 * fh))
        ox = int(rng.integers(fx, max(fx + 1, fx + fw - ow)))
        oy = int(rng.integers(fy, max(fy + 1, fy + fh - oh)))
        shade = int(rng.integers(70, 110))
        img[max(0, oy) : oy + oh, max(0, ox) : ox + ow] = (shade, shade, shade)

    return img, RenderInfo(figure_box=figure_box, regions=regions, fills=fills)


def _record_id(pixels: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(str(pixels.shape).encode())
    h.update(pixels.tobytes())
    return "syn-" + h.hexdigest()[:16]


def generate_dataset(config: SyntheticConfig, registry: SchoolRegistry) -> SyntheticDataset:
    """Render the full ground-truthed dataset for a registry.

    Defaults mirror the real data shape: 10 schools x 100 uniform images
    plus 1000 casual images = 2000 records, half uniform-positive.
    """
    if config.render_size[0] < 1 or config.render_size[1] < 1:
        raise ConfigError("render dimensions must be positive")

    records: list[ImageRecord] = []
    infos: dict[str, RenderInfo] = {}

    def school_anchor(school_id: str):
        # One garment shade per (school, item): schools keep consistent
        # garments while the class band still varies across schools.
        def pick(item: ClothingItem, color: ColorClass) -> tuple[int, int, int]:
            anchors = ANCHORS[color]
            if not anchors:
                raise DataError(f"cannot render NO_COLOR region for {item.name}")
            key = hashlib.sha256(f"{school_id}|{item.name}".encode()).digest()
            return anchors[key[0] % len(anchors)]

        return pick

    def casual_anchor(rng: np.random.Generator):
        def pick(item: ClothingItem, color: ColorClass) -> tuple[int, int, int]:
            anchors = ANCHORS[color]
            return anchors[int(rng.integers(len(anchors)))]

        return pick

    idx = 0
    for profile in registry.profiles:
        picker = school_anchor(profile.school_id)
        for _ in range(config.uniform_images_per_school):
            rng = derive_rng(config.seed, f"img-{idx}")
            variant = profile.variants[int(rng.integers(len(profile.variants)))]
            pixels, info = _render_image(rng, config, variant, True, picker)
            image_id = _record_id(pixels)
            records.append(
                ImageRecord(
                    image_id=image_id,
                    pixels=pixels,
                    byte_size=int(pixels.nbytes),
                    source=ImageSource.SYNTHETIC,
                    school_id=profile.school_id,
                    ground_truth=GroundTruth(uniform_flag=True, label=variant),
                )
            )
            infos[image_id] = info
            idx += 1

    for _ in range(config.num_nonuniform_images):
        rng = derive_rng(config.seed, f"img-{idx}")
        label = _sample_casual_label(rng)
        pixels, info = _render_image(rng, config, label, False, casual_anchor(rng))
        image_id = _record_id(pixels)
        records.append(
            ImageRecord(
                image_id=image_id,
                pixels=pixels,
                byte_size=int(pixels.nbytes),
                source=ImageSource.SYNTHETIC,
                school_id=None,
                ground_truth=GroundTruth(uniform_flag=False, label=label),
            )
        )
        infos[image_id] = info
        idx += 1

    ids = [r.image_id for r in records]
    if len(set(ids)) != len(ids):
        raise DataError("content-hash collision in generated dataset")
    return SyntheticDataset(
        records=records,
        render_infos=infos,
        config=config,
        registry_digest=registry.digest,
    )
