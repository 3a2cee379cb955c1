"""On-disk formats: detection dumps (JSONL), dataset manifests, tile plans,
and metrics reports.

Dumps are one JSON object per line with a fixed key order and compact
separators; floats use Python's shortest round-trip repr, so parsing a
canonical file and re-serializing it is byte-identical. Parsing is fail-fast:
the first malformed line raises DumpFormatError with its line number.
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from .evaluation import MetricsReport
from .geometry import (
    FRAME_GLOBAL,
    FRAME_LOCAL,
    Annotation,
    AnnotationSet,
    BBox,
    Detection,
    SlideInfo,
)
from .tiling import Tile, TilePlan

__all__ = [
    "DatasetManifest",
    "DumpFormatError",
    "RoiRecord",
    "detection_to_record",
    "load_manifest",
    "load_tile_plan",
    "read_dump",
    "record_to_detection",
    "save_manifest",
    "save_metrics",
    "save_tile_plan",
    "split_rois",
    "write_dump",
]


class DumpFormatError(ValueError):
    """A detection dump line failed to parse or validate."""

    def __init__(self, path: str, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


def detection_to_record(det: Detection) -> dict:
    """Canonical dict form of one detection (fixed key order)."""
    record: dict = {"slide_id": det.slide_id, "model_id": det.model_id, "frame": det.frame}
    if det.frame == FRAME_LOCAL:
        record["tile_index"] = det.tile_index
    record["box"] = [det.bbox.x1, det.bbox.y1, det.bbox.x2, det.bbox.y2]
    record["score"] = det.score
    return record


def record_to_detection(obj: dict) -> Detection:
    """Validate one parsed dump record; raises ValueError with the reason."""
    if not isinstance(obj, dict):
        raise ValueError(f"record must be a JSON object, got {type(obj).__name__}")
    for key in ("slide_id", "model_id", "frame", "box", "score"):
        if key not in obj:
            raise ValueError(f"missing field {key!r}")
    box = obj["box"]
    if not (isinstance(box, list) and len(box) == 4 and all(isinstance(v, (int, float)) for v in box)):
        raise ValueError(f"box must be a list of 4 numbers, got {box!r}")
    score = obj["score"]
    if not isinstance(score, (int, float)) or not math.isfinite(score):
        raise ValueError(f"score must be a finite number, got {score!r}")
    frame = obj["frame"]
    if frame not in (FRAME_LOCAL, FRAME_GLOBAL):
        raise ValueError(f"frame must be 'local' or 'global', got {frame!r}")
    tile_index = obj.get("tile_index")
    if frame == FRAME_LOCAL and not isinstance(tile_index, int):
        raise ValueError(f"local-frame record needs an integer tile_index, got {tile_index!r}")
    return Detection(
        bbox=BBox(*(float(v) for v in box)),
        score=float(score),
        model_id=str(obj["model_id"]),
        slide_id=str(obj["slide_id"]),
        frame=frame,
        tile_index=tile_index,
    )


def read_dump(path: str) -> dict[str, list[Detection]]:
    """Parse a JSONL detection dump, grouped by model_id (insertion order)."""
    groups: dict[str, list[Detection]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as err:
                raise DumpFormatError(path, line_no, f"invalid JSON: {err.msg}") from err
            try:
                det = record_to_detection(obj)
            except ValueError as err:
                raise DumpFormatError(path, line_no, str(err)) from err
            groups.setdefault(det.model_id, []).append(det)
    return groups


def write_dump(path: str, detections: Iterable[Detection]) -> None:
    """Write detections in canonical JSONL form."""
    with open(path, "w", encoding="utf-8") as fh:
        for det in detections:
            fh.write(json.dumps(detection_to_record(det), separators=(",", ":")))
            fh.write("\n")


@dataclass(frozen=True)
class RoiRecord:
    """One manifest entry: slide geometry, annotation centers, optional split."""

    slide: SlideInfo
    centers: tuple[tuple[float, float], ...]
    split: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "centers", tuple((float(x), float(y)) for x, y in self.centers))
        if self.split not in (None, "train", "test"):
            raise ValueError(f"split must be 'train', 'test', or None, got {self.split!r}")
        for x, y in self.centers:
            if not (0 <= x < self.slide.width and 0 <= y < self.slide.height):
                raise ValueError(
                    f"annotation center ({x}, {y}) outside slide "
                    f"{self.slide.slide_id!r} ({self.slide.width}x{self.slide.height})"
                )


@dataclass(frozen=True)
class DatasetManifest:
    """A dataset: uniform annotation box size plus the ROI list."""

    box_size: float
    rois: tuple[RoiRecord, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rois", tuple(self.rois))
        if self.box_size <= 0:
            raise ValueError(f"box_size must be positive, got {self.box_size}")
        seen = set()
        for roi in self.rois:
            if roi.slide.slide_id in seen:
                raise ValueError(f"duplicate slide_id {roi.slide.slide_id!r} in manifest")
            seen.add(roi.slide.slide_id)

    def annotation_set(self, slide_id: str) -> AnnotationSet:
        for roi in self.rois:
            if roi.slide.slide_id == slide_id:
                return AnnotationSet(
                    slide_id=slide_id,
                    annotations=tuple(
                        Annotation(center_x=x, center_y=y, slide_id=slide_id)
                        for x, y in roi.centers
                    ),
                    box_size=self.box_size,
                )
        raise KeyError(f"no ROI with slide_id {slide_id!r}")

    def annotation_sets(self, split: str | None = None) -> list[AnnotationSet]:
        """All annotation sets, optionally restricted to one split."""
        return [
            self.annotation_set(roi.slide.slide_id)
            for roi in self.rois
            if split is None or roi.split == split
        ]

    def split_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for roi in self.rois:
            key = roi.split if roi.split is not None else "unassigned"
            counts[key] = counts.get(key, 0) + 1
        return counts


def _roi_to_obj(roi: RoiRecord) -> dict:
    return {
        "slide_id": roi.slide.slide_id,
        "width": roi.slide.width,
        "height": roi.slide.height,
        "microns_per_pixel": roi.slide.microns_per_pixel,
        "annotations": [[x, y] for x, y in roi.centers],
        "split": roi.split,
    }


def _obj_to_roi(obj: dict) -> RoiRecord:
    slide = SlideInfo(
        slide_id=str(obj["slide_id"]),
        width=int(obj["width"]),
        height=int(obj["height"]),
        microns_per_pixel=obj.get("microns_per_pixel"),
    )
    return RoiRecord(
        slide=slide,
        centers=tuple((float(x), float(y)) for x, y in obj.get("annotations", [])),
        split=obj.get("split"),
    )


def save_manifest(manifest: DatasetManifest, path: str) -> None:
    obj = {"box_size": manifest.box_size, "rois": [_roi_to_obj(r) for r in manifest.rois]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def load_manifest(path: str) -> DatasetManifest:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    try:
        return DatasetManifest(
            box_size=float(obj["box_size"]),
            rois=tuple(_obj_to_roi(r) for r in obj["rois"]),
        )
    except (KeyError, TypeError, ValueError) as err:
        raise ValueError(f"{path}: invalid manifest: {err}") from err


def split_rois(manifest: DatasetManifest, train_fraction: float, seed: int) -> DatasetManifest:
    """Assign train/test splits by seeded shuffle + prefix.

    Train count is round(train_fraction * N), never below 1, so the achieved
    fraction differs from the target by less than 1/N. ROI order is preserved;
    only the split labels change.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = len(manifest.rois)
    if n == 0:
        raise ValueError("manifest has no ROIs to split")
    n_train = max(1, int(math.floor(train_fraction * n + 0.5)))
    perm = np.random.default_rng(seed).permutation(n)
    train_ids = set(perm[:n_train].tolist())
    rois = tuple(
        RoiRecord(
            slide=roi.slide,
            centers=roi.centers,
            split="train" if i in train_ids else "test",
        )
        for i, roi in enumerate(manifest.rois)
    )
    return DatasetManifest(box_size=manifest.box_size, rois=rois)


def save_tile_plan(plan: TilePlan, path: str) -> None:
    obj = {
        "slide": {
            "slide_id": plan.slide.slide_id,
            "width": plan.slide.width,
            "height": plan.slide.height,
            "microns_per_pixel": plan.slide.microns_per_pixel,
        },
        "tile_size": plan.tile_size,
        "overlap": plan.overlap,
        "tiles": [
            {"index": t.index, "ox": t.ox, "oy": t.oy, "width": t.width, "height": t.height}
            for t in plan.tiles
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def load_tile_plan(path: str) -> TilePlan:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    try:
        slide = SlideInfo(
            slide_id=str(obj["slide"]["slide_id"]),
            width=int(obj["slide"]["width"]),
            height=int(obj["slide"]["height"]),
            microns_per_pixel=obj["slide"].get("microns_per_pixel"),
        )
        tiles = tuple(
            Tile(
                index=int(t["index"]),
                ox=int(t["ox"]),
                oy=int(t["oy"]),
                width=int(t["width"]),
                height=int(t["height"]),
            )
            for t in obj["tiles"]
        )
        return TilePlan(
            slide=slide, tile_size=int(obj["tile_size"]), overlap=int(obj["overlap"]), tiles=tiles
        )
    except (KeyError, TypeError, ValueError) as err:
        raise ValueError(f"{path}: invalid tile plan: {err}") from err


def save_metrics(report: MetricsReport, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
