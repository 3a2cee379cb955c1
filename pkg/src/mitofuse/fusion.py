"""Multi-model prediction fusion: threshold, pool, and greedy IoU suppression.

The ensembling recipe is deliberately simple: per-model candidates are score
thresholded, mapped into slide coordinates, pooled into one candidate set, and
deduplicated by greedy NMS that keeps the highest-confidence box of each
overlap cluster. Disjoint boxes survive no matter which model produced them,
which is where the pooled ensemble's recall gain comes from.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .geometry import FRAME_GLOBAL, FRAME_LOCAL, Detection
from .tiling import TilePlan, to_global

__all__ = [
    "DEFAULT_NMS_IOU",
    "DEFAULT_SCORE_THRESHOLD",
    "CandidateSet",
    "FusionConfig",
    "fuse",
    "merge_model_outputs",
    "nms",
    "nms_bruteforce",
    "nms_sort_key",
    "threshold_detections",
]

# Operating point for the published ensemble: keep score >= 0.399, suppress
# pairs at IoU >= 0.4.
DEFAULT_SCORE_THRESHOLD = 0.399
DEFAULT_NMS_IOU = 0.4


@dataclass(frozen=True)
class FusionConfig:
    """Thresholds for the two-stage fuse: score gate first, then NMS IoU."""

    score_threshold: float = DEFAULT_SCORE_THRESHOLD
    nms_iou_threshold: float = DEFAULT_NMS_IOU

    def __post_init__(self) -> None:
        if not 0.0 <= self.score_threshold <= 1.0:
            raise ValueError(f"score_threshold must be in [0, 1], got {self.score_threshold}")
        if not 0.0 < self.nms_iou_threshold < 1.0:
            raise ValueError(f"nms_iou_threshold must be in (0, 1), got {self.nms_iou_threshold}")


@dataclass(frozen=True)
class CandidateSet:
    """Global-frame detections of a single slide, possibly from several models."""

    slide_id: str
    detections: tuple[Detection, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "detections", tuple(self.detections))
        for det in self.detections:
            if det.frame != FRAME_GLOBAL:
                raise ValueError("candidate sets hold global-frame detections only")
            if det.slide_id != self.slide_id:
                raise ValueError(
                    f"detection from slide {det.slide_id!r} in candidate set for {self.slide_id!r}"
                )

    def __len__(self) -> int:
        return len(self.detections)

    def __iter__(self):
        return iter(self.detections)

    @staticmethod
    def _trusted(slide_id: str, detections: tuple[Detection, ...]) -> CandidateSet:
        # Skip __post_init__ for outputs assembled from an already-validated
        # set (NMS keeps a subset); at slide scale re-validation is pure cost.
        obj = object.__new__(CandidateSet)
        object.__setattr__(obj, "slide_id", slide_id)
        object.__setattr__(obj, "detections", detections)
        return obj


def threshold_detections(detections: Iterable[Detection], score_threshold: float) -> list[Detection]:
    """Keep detections with score >= score_threshold (inclusive), order preserved."""
    if not 0.0 <= score_threshold <= 1.0:
        raise ValueError(f"score_threshold must be in [0, 1], got {score_threshold}")
    return [det for det in detections if det.score >= score_threshold]


def merge_model_outputs(
    per_model: Sequence[Sequence[Detection]], slide_id: str | None = None
) -> CandidateSet:
    """Pool per-model detection lists into one candidate set.

    Pure concatenation: scores and model_id provenance are untouched, no
    deduplication happens here. slide_id is inferred from the detections; pass
    it explicitly when every input may be empty.
    """
    merged = [det for dets in per_model for det in dets]
    if slide_id is None:
        if not merged:
            raise ValueError("cannot infer slide_id from empty inputs; pass slide_id")
        slide_id = merged[0].slide_id
    return CandidateSet(slide_id=slide_id, detections=tuple(merged))


def nms_sort_key(det: Detection) -> tuple:
    """Total order for NMS processing: score desc, then x1, y1, model_id asc.

    A total order makes greedy suppression invariant to input permutation.
    """
    return (-det.score, det.bbox.x1, det.bbox.y1, det.model_id)


def _sorted_order(
    dets: Sequence[Detection],
    key: Callable[[Detection], tuple],
    cols: tuple[np.ndarray, np.ndarray] | None = None,
) -> list[int]:
    if key is nms_sort_key and len(dets) > 2000:
        # np.lexsort on column arrays; last key is most significant. Same
        # total order as the tuple key, much faster at slide scale.
        if cols is None:
            x1 = np.fromiter((d.bbox.x1 for d in dets), dtype=np.float64, count=len(dets))
            y1 = np.fromiter((d.bbox.y1 for d in dets), dtype=np.float64, count=len(dets))
        else:
            x1, y1 = cols
        scores = np.fromiter((d.score for d in dets), dtype=np.float64, count=len(dets))
        models = np.array([d.model_id for d in dets])
        return np.lexsort((models, y1, x1, -scores)).tolist()
    return sorted(range(len(dets)), key=lambda i: key(dets[i]))


def nms(
    candidates: CandidateSet,
    iou_threshold: float = DEFAULT_NMS_IOU,
    key: Callable[[Detection], tuple] = nms_sort_key,
) -> CandidateSet:
    """Greedy non-maximum suppression, highest-confidence box per overlap cluster.

    Boxes are visited in `key` order; a box is kept iff its IoU with every
    previously kept box is < iou_threshold (the threshold itself suppresses).
    Kept boxes index into a uniform grid over box centers with cell edge equal
    to the largest box extent: two boxes can only overlap if their centers are
    within one extent per axis, so probing the 3x3 cell neighborhood sees every
    kept box that could suppress the candidate. That makes suppression roughly
    linear-time at slide scale while staying bit-identical to the quadratic
    reference `nms_bruteforce`.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError(f"iou_threshold must be in (0, 1), got {iou_threshold}")
    dets = candidates.detections
    if len(dets) <= 1:
        return CandidateSet._trusted(candidates.slide_id, dets)

    bboxes = [d.bbox for d in dets]
    xs1 = [b.x1 for b in bboxes]
    ys1 = [b.y1 for b in bboxes]
    xs2 = [b.x2 for b in bboxes]
    ys2 = [b.y2 for b in bboxes]
    ax1 = np.array(xs1)
    ay1 = np.array(ys1)
    ax2 = np.array(xs2)
    ay2 = np.array(ys2)
    order = _sorted_order(dets, key, cols=(ax1, ay1))
    widths = ax2 - ax1
    heights = ay2 - ay1
    areas = (widths * heights).tolist()
    # Cell edge slightly above the max extent: overlapping boxes then map to
    # adjacent cells even after floating-point rounding of center / cell.
    cell = float(max(widths.max(), heights.max())) * 1.000001
    half_inv = 0.5 / cell
    gxs = np.floor((ax1 + ax2) * half_inv).astype(np.int64)
    # Cells are keyed by a single int, gx * STRIDE + gy; STRIDE only needs to
    # make neighbor offsets unambiguous, and Python ints never overflow.
    STRIDE = 1 << 21
    cell_keys = (gxs * STRIDE + np.floor((ay1 + ay2) * half_inv).astype(np.int64)).tolist()

    grid: dict[int, list[int]] = {}
    grid_get = grid.get
    kept: list[int] = []
    kept_append = kept.append
    offsets = (-STRIDE - 1, -STRIDE, -STRIDE + 1, -1, 0, 1, STRIDE - 1, STRIDE, STRIDE + 1)
    for i in order:
        x1 = xs1[i]
        y1 = ys1[i]
        x2 = xs2[i]
        y2 = ys2[i]
        area = areas[i]
        base = cell_keys[i]
        suppressed = False
        for off in offsets:
            bucket = grid_get(base + off)
            if bucket is None:
                continue
            for j in bucket:
                jx2 = xs2[j]
                jx1 = xs1[j]
                iw = (jx2 if jx2 < x2 else x2) - (jx1 if jx1 > x1 else x1)
                if iw <= 0.0:
                    continue
                jy2 = ys2[j]
                jy1 = ys1[j]
                ih = (jy2 if jy2 < y2 else y2) - (jy1 if jy1 > y1 else y1)
                if ih <= 0.0:
                    continue
                inter = iw * ih
                if inter / (area + areas[j] - inter) >= iou_threshold:
                    suppressed = True
                    break
            if suppressed:
                break
        if not suppressed:
            kept_append(i)
            bucket = grid_get(base)
            if bucket is None:
                grid[base] = [i]
            else:
                bucket.append(i)
    return CandidateSet._trusted(candidates.slide_id, tuple(dets[i] for i in kept))


def nms_bruteforce(
    candidates: CandidateSet,
    iou_threshold: float = DEFAULT_NMS_IOU,
    key: Callable[[Detection], tuple] = nms_sort_key,
) -> CandidateSet:
    """Quadratic reference NMS: sort, keep the top, discard everything it
    suppresses, repeat. Kept as the oracle the grid-indexed path must match."""
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError(f"iou_threshold must be in (0, 1), got {iou_threshold}")
    dets = candidates.detections
    if len(dets) <= 1:
        return CandidateSet(candidates.slide_id, dets)

    order = _sorted_order(dets, key)
    boxes = np.array([[d.bbox.x1, d.bbox.y1, d.bbox.x2, d.bbox.y2] for d in dets], dtype=np.float64)
    boxes = boxes[order]
    areas = (boxes[:, 2] - boxes[:, 0]) * (boxes[:, 3] - boxes[:, 1])
    alive = np.ones(len(order), dtype=bool)
    kept: list[int] = []
    for pos in range(len(order)):
        if not alive[pos]:
            continue
        kept.append(order[pos])
        iw = np.minimum(boxes[pos, 2], boxes[:, 2]) - np.maximum(boxes[pos, 0], boxes[:, 0])
        ih = np.minimum(boxes[pos, 3], boxes[:, 3]) - np.maximum(boxes[pos, 1], boxes[:, 1])
        inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
        iou_row = inter / (areas[pos] + areas - inter)
        alive &= iou_row < iou_threshold
        alive[pos] = False
    return CandidateSet(candidates.slide_id, tuple(dets[i] for i in kept))


def fuse(
    per_model_dumps: Mapping[str, Sequence[Detection]],
    tile_plan: TilePlan | None = None,
    config: FusionConfig = FusionConfig(),
    slide_id: str | None = None,
) -> CandidateSet:
    """Full ensemble pipeline: threshold -> map to slide frame -> pool -> NMS.

    Local-frame detections are translated through their tile in `tile_plan`
    (required if any are present); global-frame detections pass through.
    Models are pooled in sorted model_id order so results never depend on
    mapping iteration order.
    """
    per_model_global: list[list[Detection]] = []
    for model_id in sorted(per_model_dumps):
        kept = threshold_detections(per_model_dumps[model_id], config.score_threshold)
        mapped = []
        for det in kept:
            if det.frame == FRAME_LOCAL:
                if tile_plan is None:
                    raise ValueError("local-frame detections require a tile plan")
                mapped.append(to_global(det, tile_plan.tile(det.tile_index)))
            else:
                mapped.append(det)
        per_model_global.append(mapped)
    merged = merge_model_outputs(per_model_global, slide_id=slide_id)
    return nms(merged, config.nms_iou_threshold)
