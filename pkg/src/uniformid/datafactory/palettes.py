"""Fixed RGB palette bands for each merged color class.

Each class owns one or two anchor colors (e.g. RED_BROWN covers a red and
a brown).  A pixel's class is the class of its nearest anchor, and the
jitter applied by the generator is clamped so a jittered fill never
crosses into another class's band — this is what keeps synthetic ground
truth exactly re-derivable from pixels.
"""

from __future__ import annotations

import colorsys

import numpy as np

from ..schema import COLORS, ColorClass

# Anchor RGB values, uint8 scale. NO_COLOR has no anchors (item absent).
ANCHORS: dict[ColorClass, tuple[tuple[int, int, int], ...]] = {
    ColorClass.RED_BROWN: ((170, 35, 35), (115, 62, 34)),
    ColorClass.YELLOW_ORANGE: ((235, 185, 45), (230, 128, 36)),
    ColorClass.GREEN: ((45, 125, 60), (88, 162, 88)),
    ColorClass.BLUE_PURPLE: ((40, 70, 170), (112, 60, 162)),
    ColorClass.WHITE: ((245, 245, 245),),
    ColorClass.BLACK_GREY: ((35, 35, 35), (118, 118, 118)),
    ColorClass.NO_COLOR: (),
}

_ANCHOR_LIST: list[tuple[ColorClass, np.ndarray]] = [
    (cls, np.array(a, dtype=np.float64)) for cls in COLORS for a in ANCHORS[cls]
]


def classify_rgb(rgb) -> ColorClass:
    """Nearest-anchor color class; ties go to the lowest class ordinal."""
    p = np.asarray(rgb, dtype=np.float64)
    best_cls = None
    best_d = None
    for cls, anchor in _ANCHOR_LIST:
        d = float(np.sum((p - anchor) ** 2))
        if best_d is None or d < best_d:
            best_d = d
            best_cls = cls
    assert best_cls is not None
    return best_cls


def jitter_color(
    rng: np.random.Generator,
    anchor: tuple[int, int, int],
    color_class: ColorClass,
    hue_jitter_deg: float,
    brightness_jitter: float,
) -> tuple[int, int, int]:
    """Jitter an anchor in HSV, clamped to stay inside its class band."""
    r, g, b = (v / 255.0 for v in anchor)
    h, s, v = colorsys.rgb_to_hsv(r, g, b)
    h = (h + rng.uniform(-hue_jitter_deg, hue_jitter_deg) / 360.0) % 1.0
    v = float(np.clip(v * (1.0 + rng.uniform(-brightness_jitter, brightness_jitter)), 0.0, 1.0))
    s = float(np.clip(s * (1.0 + rng.uniform(-brightness_jitter, brightness_jitter) * 0.5), 0.0, 1.0))
    rgb = np.array(colorsys.hsv_to_rgb(h, s, v)) * 255.0

    # Pull back toward the anchor until the nearest-anchor class matches.
    target = np.array(anchor, dtype=np.float64)
    for _ in range(16):
        candidate = tuple(int(round(c)) for c in np.clip(rgb, 0, 255))
        if classify_rgb(candidate) is color_class:
            return candidate
        rgb = (rgb + target) / 2.0
    # The anchor itself always classifies correctly.
    return tuple(int(v) for v in anchor)
