"""Geometric primitives shared by every stage of the detection pipeline.

Boxes use the half-open pixel convention [x1, x2) x [y1, y2) with the origin at
the slide's top-left corner, so area is (x2 - x1) * (y2 - y1) with no +1
correction and adjacent tiles partition pixels exactly. Coordinates are
real-valued: detector outputs and jittered simulations live at sub-pixel
precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "FRAME_GLOBAL",
    "FRAME_LOCAL",
    "Annotation",
    "AnnotationSet",
    "BBox",
    "Detection",
    "SlideInfo",
    "center_distance",
    "clip_box",
    "iou",
]

# Coordinate frames a Detection can live in.
FRAME_LOCAL = "local"
FRAME_GLOBAL = "global"


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box, half-open pixel coordinates, strictly positive area."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.x1, self.y1, self.x2, self.y2)):
            raise ValueError(f"box coordinates must be finite: {self}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"degenerate box (need x1 < x2 and y1 < y2): {self}")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def center(self) -> tuple[float, float]:
        return 0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2)

    def translate(self, dx: float, dy: float) -> BBox:
        return BBox(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)

    def intersects(self, other: BBox) -> bool:
        return (
            self.x1 < other.x2
            and other.x1 < self.x2
            and self.y1 < other.y2
            and other.y1 < self.y2
        )


@dataclass(frozen=True)
class Detection:
    """One candidate box from one model on one slide.

    ``frame`` is FRAME_LOCAL while the box is in tile pixel coordinates
    (``tile_index`` says which tile) and FRAME_GLOBAL once mapped to slide
    coordinates. Fusion and evaluation accept global-frame detections only.
    """

    bbox: BBox
    score: float
    model_id: str
    slide_id: str
    frame: str = FRAME_GLOBAL
    tile_index: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")
        if self.frame == FRAME_LOCAL:
            if self.tile_index is None or self.tile_index < 0:
                raise ValueError("local-frame detection needs a tile_index >= 0")
        elif self.frame == FRAME_GLOBAL:
            if self.tile_index is not None:
                raise ValueError("global-frame detection must not carry a tile_index")
        else:
            raise ValueError(f"unknown frame {self.frame!r}")


@dataclass(frozen=True)
class Annotation:
    """Ground-truth object position; datasets annotate centers, and every
    annotation on a slide shares the uniform box size of its AnnotationSet."""

    center_x: float
    center_y: float
    slide_id: str

    def __post_init__(self) -> None:
        if not (math.isfinite(self.center_x) and math.isfinite(self.center_y)):
            raise ValueError(f"annotation center must be finite: {self}")

    def box(self, box_size: float) -> BBox:
        half = 0.5 * box_size
        return BBox(
            self.center_x - half,
            self.center_y - half,
            self.center_x + half,
            self.center_y + half,
        )


@dataclass(frozen=True)
class AnnotationSet:
    """All ground-truth annotations of one slide, with their shared box size."""

    slide_id: str
    annotations: tuple[Annotation, ...]
    box_size: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "annotations", tuple(self.annotations))
        if self.box_size <= 0:
            raise ValueError(f"box_size must be positive, got {self.box_size}")
        for ann in self.annotations:
            if ann.slide_id != self.slide_id:
                raise ValueError(
                    f"annotation from slide {ann.slide_id!r} in set for {self.slide_id!r}"
                )

    def __len__(self) -> int:
        return len(self.annotations)

    def __iter__(self):
        return iter(self.annotations)

    def boxes(self) -> list[BBox]:
        return [ann.box(self.box_size) for ann in self.annotations]


@dataclass(frozen=True)
class SlideInfo:
    """Pixel dimensions (and optional physical resolution) of one slide."""

    slide_id: str
    width: int
    height: int
    microns_per_pixel: float | None = None

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"slide must be at least 1x1, got {self.width}x{self.height}")
        if self.microns_per_pixel is not None and self.microns_per_pixel <= 0:
            raise ValueError(f"microns_per_pixel must be positive, got {self.microns_per_pixel}")


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes; 0.0 when they are disjoint."""
    ix1 = max(a.x1, b.x1)
    iy1 = max(a.y1, b.y1)
    ix2 = min(a.x2, b.x2)
    iy2 = min(a.y2, b.y2)
    iw = ix2 - ix1
    ih = iy2 - iy1
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (a.area() + b.area() - inter)


def center_distance(a: BBox, b: BBox) -> float:
    """Euclidean distance between the centers of two boxes, in pixels."""
    ax, ay = a.center()
    bx, by = b.center()
    return math.hypot(ax - bx, ay - by)


def clip_box(box: BBox, bounds: SlideInfo) -> BBox | None:
    """Intersect a box with the slide rectangle; None when nothing remains."""
    x1 = max(box.x1, 0.0)
    y1 = max(box.y1, 0.0)
    x2 = min(box.x2, float(bounds.width))
    y2 = min(box.y2, float(bounds.height))
    if x1 >= x2 or y1 >= y2:
        return None
    return BBox(x1, y1, x2, y2)
