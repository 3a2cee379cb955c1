"""Label-aware raster augmentations: color, texture, and compositional.

Every operation is a pure function of (inputs, parameters, seed): inputs are
never mutated, values are rounded half-to-even before the 8-bit clamp, and
randomness comes only from an explicitly passed AugSeed, so augmentation
pipelines are bit-reproducible and batch order never matters.

Patches are plain HxWx3 uint8 arrays (RGB). LabeledPatch carries the box
annotations alongside; the pixel-only ops take bare arrays and cannot touch
labels by construction.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .geometry import BBox, SlideInfo, clip_box

__all__ = [
    "AugSeed",
    "LabeledPatch",
    "cutmix",
    "gaussian_blur",
    "gaussian_kernel",
    "gaussian_noise",
    "hsv_shift",
    "hsv_to_rgb",
    "mosaic",
    "rgb_to_hsv",
    "sharpen",
]

MOSAIC_FILL = 114
MIN_BOX_AREA_FRAC = 0.25


@dataclass(frozen=True)
class AugSeed:
    """Root seed plus a per-call sequence id.

    Every (seed, sequence) pair is an independent, reproducible stream; bump
    `sequence` to vary an augmentation within one run without touching the
    run's root seed.
    """

    seed: int
    sequence: int = 0

    def __post_init__(self) -> None:
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")
        if self.sequence < 0:
            raise ValueError(f"sequence must be non-negative, got {self.sequence}")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(entropy=self.seed, spawn_key=(self.sequence,))
        )

    def with_sequence(self, sequence: int) -> AugSeed:
        return AugSeed(self.seed, sequence)


def _check_patch(patch: np.ndarray) -> np.ndarray:
    if not isinstance(patch, np.ndarray):
        raise ValueError(f"patch must be a numpy array, got {type(patch).__name__}")
    if patch.ndim != 3 or patch.shape[2] != 3 or patch.dtype != np.uint8:
        raise ValueError(f"patch must be HxWx3 uint8, got shape {patch.shape} dtype {patch.dtype}")
    if patch.shape[0] < 1 or patch.shape[1] < 1:
        raise ValueError(f"patch must be at least 1x1, got shape {patch.shape}")
    return patch


def _to_uint8(values: np.ndarray) -> np.ndarray:
    """Round half-to-even, clamp to [0, 255], cast."""
    return np.clip(np.rint(values), 0.0, 255.0).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class LabeledPatch:
    """A patch plus its box annotations in patch-local pixel coordinates.

    Boxes must intersect the patch; fully-outside boxes are stale labels and
    rejected. eq is disabled because array equality is elementwise.
    """

    patch: np.ndarray
    boxes: tuple[BBox, ...]

    def __post_init__(self) -> None:
        _check_patch(self.patch)
        object.__setattr__(self, "boxes", tuple(self.boxes))
        h, w = self.patch.shape[:2]
        for box in self.boxes:
            if not (box.x1 < w and box.x2 > 0 and box.y1 < h and box.y2 > 0):
                raise ValueError(f"box {box} does not intersect the {w}x{h} patch")

    @property
    def width(self) -> int:
        return self.patch.shape[1]

    @property
    def height(self) -> int:
        return self.patch.shape[0]


def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    """Hexcone RGB -> HSV on float arrays in [0, 1].

    Hue is in degrees [0, 360): 60 degrees per sector, sector picked by the
    dominant channel ((g-b)/c, (b-r)/c + 2, (r-g)/c + 4). Saturation is
    (max - min) / max (0 where the pixel is black), value is the channel max.
    """
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = np.max(rgb, axis=-1)
    c = v - np.min(rgb, axis=-1)
    safe_c = np.where(c > 0, c, 1.0)
    h = np.select(
        [c == 0, v == r, v == g],
        [0.0, ((g - b) / safe_c) % 6.0, (b - r) / safe_c + 2.0],
        default=(r - g) / safe_c + 4.0,
    ) * 60.0
    s = np.where(v > 0, c / np.where(v > 0, v, 1.0), 0.0)
    return np.stack([h, s, v], axis=-1)


def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    """Inverse hexcone transform; accepts any real hue (wrapped mod 360)."""
    hsv = np.asarray(hsv, dtype=np.float64)
    h = (hsv[..., 0] % 360.0) / 60.0
    s, v = hsv[..., 1], hsv[..., 2]
    c = v * s
    x = c * (1.0 - np.abs(h % 2.0 - 1.0))
    sector = np.floor(h).astype(np.int64) % 6
    zero = np.zeros_like(c)
    # (r', g', b') per 60-degree sector, before adding the value offset.
    r = np.select([sector == 0, sector == 1, sector == 2, sector == 3, sector == 4], [c, x, zero, zero, x], default=c)
    g = np.select([sector == 0, sector == 1, sector == 2, sector == 3, sector == 4], [x, c, c, x, zero], default=zero)
    b = np.select([sector == 0, sector == 1, sector == 2, sector == 3, sector == 4], [zero, zero, x, c, c], default=x)
    m = v - c
    return np.stack([r + m, g + m, b + m], axis=-1)


def hsv_shift(
    patch: np.ndarray,
    hue_shift_deg: float = 0.0,
    sat_scale: float = 1.0,
    val_scale: float = 1.0,
) -> np.ndarray:
    """Rotate hue and scale saturation/brightness per pixel.

    s and v are clamped to [0, 1] after scaling; identity parameters
    (0, 1, 1) reproduce the input bit-exactly.
    """
    _check_patch(patch)
    if not -180.0 <= hue_shift_deg <= 180.0:
        raise ValueError(f"hue_shift_deg must be in [-180, 180], got {hue_shift_deg}")
    if sat_scale < 0 or val_scale < 0:
        raise ValueError(f"scales must be non-negative, got {sat_scale}, {val_scale}")
    hsv = rgb_to_hsv(patch.astype(np.float64) / 255.0)
    hsv[..., 0] = (hsv[..., 0] + hue_shift_deg) % 360.0
    hsv[..., 1] = np.clip(hsv[..., 1] * sat_scale, 0.0, 1.0)
    hsv[..., 2] = np.clip(hsv[..., 2] * val_scale, 0.0, 1.0)
    return _to_uint8(hsv_to_rgb(hsv) * 255.0)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Sampled 1-D Gaussian, radius ceil(3*sigma), normalized to sum 1."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (x / sigma) ** 2)
    return kernel / kernel.sum()


def _convolve_axis(img: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = len(kernel) // 2
    pad = [(0, 0)] * img.ndim
    pad[axis] = (radius, radius)
    padded = np.pad(img, pad, mode="edge")
    out = np.zeros_like(img)
    for tap, weight in enumerate(kernel):
        sl = [slice(None)] * img.ndim
        sl[axis] = slice(tap, tap + img.shape[axis])
        out += weight * padded[tuple(sl)]
    return out


def gaussian_blur(patch: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian convolution; edges replicate the nearest pixel."""
    _check_patch(patch)
    kernel = gaussian_kernel(sigma)
    img = patch.astype(np.float64)
    img = _convolve_axis(img, kernel, axis=0)
    img = _convolve_axis(img, kernel, axis=1)
    return _to_uint8(img)


def sharpen(patch: np.ndarray, amount: float, sigma: float = 1.0) -> np.ndarray:
    """Unsharp masking: patch + amount * (patch - blurred), clamped.

    The mask is built from the quantized blur output, so sharpen(blur(p))
    chains exactly like the two separate CLI steps would.
    """
    _check_patch(patch)
    if amount < 0:
        raise ValueError(f"amount must be non-negative, got {amount}")
    base = patch.astype(np.float64)
    blurred = gaussian_blur(patch, sigma).astype(np.float64)
    return _to_uint8(base + amount * (base - blurred))


def gaussian_noise(patch: np.ndarray, sigma: float, seed: AugSeed) -> np.ndarray:
    """Additive zero-mean Gaussian noise, independent per channel sample."""
    _check_patch(patch)
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    noise = seed.rng().normal(0.0, float(sigma), size=patch.shape)
    return _to_uint8(patch.astype(np.float64) + noise)


def mosaic(
    inputs: Sequence[LabeledPatch],
    out_size: int,
    seed: AugSeed,
    center: tuple[int, int] | None = None,
) -> LabeledPatch:
    """Four-quadrant composite with translated, clipped box labels.

    The mosaic center is drawn uniformly from the integer points of the
    central half of the canvas (pass `center` for a fixed layout). Input k is
    anchored at the quadrant corner touching the center (order: top-left,
    top-right, bottom-left, bottom-right), cropped to what fits, and its boxes
    are translated along; a box keeping less than 25% of its area is dropped.
    Uncovered canvas stays at the conventional gray fill (114).
    """
    if len(inputs) != 4:
        raise ValueError(f"mosaic needs exactly 4 labeled patches, got {len(inputs)}")
    if out_size < 2:
        raise ValueError(f"out_size must be >= 2, got {out_size}")
    if center is None:
        rng = seed.rng()
        quarter = out_size // 4
        cx = int(rng.integers(quarter, out_size - quarter, endpoint=True))
        cy = int(rng.integers(quarter, out_size - quarter, endpoint=True))
    else:
        cx, cy = center
        if not (0 <= cx <= out_size and 0 <= cy <= out_size):
            raise ValueError(f"center {center} outside canvas of size {out_size}")

    canvas = np.full((out_size, out_size, 3), MOSAIC_FILL, dtype=np.uint8)
    bounds = SlideInfo("mosaic-canvas", out_size, out_size)
    out_boxes: list[BBox] = []
    for quadrant, lp in enumerate(inputs):
        h, w = lp.patch.shape[:2]
        if quadrant == 0:
            ox, oy = cx - w, cy - h
        elif quadrant == 1:
            ox, oy = cx, cy - h
        elif quadrant == 2:
            ox, oy = cx - w, cy
        else:
            ox, oy = cx, cy
        px1, py1 = max(ox, 0), max(oy, 0)
        px2, py2 = min(ox + w, out_size), min(oy + h, out_size)
        if px1 < px2 and py1 < py2:
            canvas[py1:py2, px1:px2] = lp.patch[py1 - oy : py2 - oy, px1 - ox : px2 - ox]
        for box in lp.boxes:
            moved = box.translate(ox, oy)
            clipped = clip_box(moved, bounds)
            if clipped is not None and clipped.area() >= MIN_BOX_AREA_FRAC * box.area():
                out_boxes.append(clipped)
    return LabeledPatch(canvas, tuple(out_boxes))


def cutmix(
    target: LabeledPatch,
    source: LabeledPatch,
    seed: AugSeed,
    area_frac: tuple[float, float] = (0.1, 0.4),
    aspect: tuple[float, float] = (0.5, 2.0),
    max_tries: int = 16,
) -> LabeledPatch:
    """Transplant a random source rectangle into the target.

    The rectangle covers U[0.1, 0.4] of the target area at aspect U[0.5, 2],
    placed uniformly inside the target; the same pixel rectangle is copied
    from the source, so the source must contain it (resampled up to max_tries,
    then ValueError). Labels follow the center rule: target boxes whose center
    falls inside the rectangle (half-open) are removed, source boxes whose
    center falls inside are transplanted and clipped to the rectangle; all
    other boxes keep their exact coordinates.
    """
    rng = seed.rng()
    th, tw = target.patch.shape[:2]
    sh, sw = source.patch.shape[:2]
    for _ in range(max_tries):
        frac = rng.uniform(*area_frac)
        ratio = rng.uniform(*aspect)
        area = frac * tw * th
        w = max(1, min(int(round(math.sqrt(area * ratio))), tw))
        h = max(1, min(int(round(math.sqrt(area / ratio))), th))
        x0 = int(rng.integers(0, tw - w, endpoint=True))
        y0 = int(rng.integers(0, th - h, endpoint=True))
        if x0 + w <= sw and y0 + h <= sh:
            break
    else:
        raise ValueError(
            f"no cutmix rectangle fit the {sw}x{sh} source after {max_tries} tries"
        )

    out = target.patch.copy()
    out[y0 : y0 + h, x0 : x0 + w] = source.patch[y0 : y0 + h, x0 : x0 + w]
    rx1, ry1, rx2, ry2 = float(x0), float(y0), float(x0 + w), float(y0 + h)

    def center_in_rect(box: BBox) -> bool:
        cx, cy = box.center()
        return rx1 <= cx < rx2 and ry1 <= cy < ry2

    out_boxes = [box for box in target.boxes if not center_in_rect(box)]
    for box in source.boxes:
        if center_in_rect(box):
            out_boxes.append(
                BBox(max(box.x1, rx1), max(box.y1, ry1), min(box.x2, rx2), min(box.y2, ry2))
            )
    return LabeledPatch(out, tuple(out_boxes))
