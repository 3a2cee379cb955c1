"""One-to-one matching of detections to ground truth, and P/R/F1 metrics.

Matching is greedy in descending score order, the standard challenge-evaluator
behavior: deterministic, order-independent (the visit order is the NMS total
order), and each annotation is claimed at most once.
"""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass

from .fusion import CandidateSet, nms_sort_key
from .geometry import Annotation, AnnotationSet, Detection, iou

__all__ = [
    "BoxIoU",
    "CenterDistance",
    "MatchCriterion",
    "MatchResult",
    "MetricsReport",
    "evaluate",
    "f1_score",
    "match_greedy",
    "metrics_from_counts",
]

DEFAULT_MATCH_RADIUS = 30.0


@dataclass(frozen=True)
class CenterDistance:
    """Match when the detection center is within `radius` px of the annotation
    center; the conventional criterion for center-annotated datasets."""

    radius: float = DEFAULT_MATCH_RADIUS

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError(f"radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class BoxIoU:
    """Match when detection box and annotation box overlap at IoU >= threshold."""

    threshold: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold}")


MatchCriterion = CenterDistance | BoxIoU


@dataclass(frozen=True)
class MatchResult:
    """Outcome of matching one slide: matched pairs, unmatched detections,
    unmatched annotations."""

    tp_pairs: tuple[tuple[Detection, Annotation], ...]
    fp: tuple[Detection, ...]
    fn: tuple[Annotation, ...]

    @property
    def tp(self) -> int:
        return len(self.tp_pairs)


@dataclass(frozen=True)
class MetricsReport:
    """Precision / recall / F1 with the raw counts they were computed from."""

    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def _grid_of_annotations(
    anns: tuple[Annotation, ...], cell: float
) -> dict[tuple[int, int], list[int]]:
    grid: dict[tuple[int, int], list[int]] = {}
    for j, ann in enumerate(anns):
        key = (math.floor(ann.center_x / cell), math.floor(ann.center_y / cell))
        grid.setdefault(key, []).append(j)
    return grid


def match_greedy(
    detections: CandidateSet,
    ground_truth: AnnotationSet,
    criterion: MatchCriterion = CenterDistance(),
) -> MatchResult:
    """Greedy one-to-one assignment in descending score order.

    Each detection claims the best still-unclaimed annotation satisfying the
    criterion: smallest center distance (or largest IoU), ties broken by
    smaller annotation index. Unmatched detections are FPs, unclaimed
    annotations FNs.

    Candidate annotations come from a uniform grid over annotation centers
    (cell edge >= the criterion's reach, 3x3 probe), which sees exactly the
    annotations a full scan would accept, just without the full scan.
    """
    if detections.slide_id != ground_truth.slide_id:
        raise ValueError(
            f"slide mismatch: detections {detections.slide_id!r} vs "
            f"ground truth {ground_truth.slide_id!r}"
        )
    dets = detections.detections
    anns = ground_truth.annotations
    order = sorted(range(len(dets)), key=lambda i: nms_sort_key(dets[i]))

    if isinstance(criterion, CenterDistance):
        # Center distance <= radius bounds per-axis center separation by radius.
        reach = criterion.radius
    else:
        # Positive IoU needs overlap, which bounds per-axis center separation
        # by (det extent + ann box size) / 2.
        max_extent = max((max(d.bbox.width, d.bbox.height) for d in dets), default=1.0)
        reach = 0.5 * (max_extent + ground_truth.box_size)
    cell = reach * 1.000001
    grid = _grid_of_annotations(anns, cell)
    ann_boxes = ground_truth.boxes() if isinstance(criterion, BoxIoU) else None

    claimed = [False] * len(anns)
    tp_pairs: list[tuple[Detection, Annotation]] = []
    fp: list[Detection] = []
    for i in order:
        det = dets[i]
        cx, cy = det.bbox.center()
        gx = math.floor(cx / cell)
        gy = math.floor(cy / cell)
        best: tuple[float, int] | None = None
        for nx in (gx - 1, gx, gx + 1):
            for ny in (gy - 1, gy, gy + 1):
                for j in grid.get((nx, ny), ()):
                    if claimed[j]:
                        continue
                    if isinstance(criterion, CenterDistance):
                        ann = anns[j]
                        dist = math.hypot(cx - ann.center_x, cy - ann.center_y)
                        if dist > criterion.radius:
                            continue
                        rank = (dist, j)
                    else:
                        overlap = iou(det.bbox, ann_boxes[j])
                        if overlap < criterion.threshold:
                            continue
                        rank = (-overlap, j)
                    if best is None or rank < best:
                        best = rank
        if best is None:
            fp.append(det)
        else:
            j = best[1]
            claimed[j] = True
            tp_pairs.append((det, anns[j]))
    fn = [ann for j, ann in enumerate(anns) if not claimed[j]]
    return MatchResult(tp_pairs=tuple(tp_pairs), fp=tuple(fp), fn=tuple(fn))


def metrics_from_counts(tp: int, fp: int, fn: int) -> MetricsReport:
    """P/R/F1 from raw counts, total on degenerate inputs.

    A zero denominator means "no predictions" or "no objects"; the metric is
    1.0 when there were also no errors of the complementary kind (vacuously
    perfect) and 0.0 otherwise, so per-slide aggregation never divides by zero.
    """
    if min(tp, fp, fn) < 0:
        raise ValueError(f"counts must be non-negative, got tp={tp} fp={fp} fn={fn}")
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        precision = 1.0 if fn == 0 else 0.0
    if tp + fn > 0:
        recall = tp / (tp + fn)
    else:
        recall = 1.0 if fp == 0 else 0.0
    return MetricsReport(
        tp=tp, fp=fp, fn=fn, precision=precision, recall=recall, f1=f1_score(precision, recall)
    )


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0.0 when both are zero."""
    if not 0.0 <= precision <= 1.0:
        raise ValueError(f"precision must be in [0, 1], got {precision}")
    if not 0.0 <= recall <= 1.0:
        raise ValueError(f"recall must be in [0, 1], got {recall}")
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def evaluate(
    detections: CandidateSet | Iterable[CandidateSet],
    ground_truth: AnnotationSet | Iterable[AnnotationSet],
    criterion: MatchCriterion = CenterDistance(),
) -> MetricsReport:
    """Micro-averaged metrics: match each slide, sum TP/FP/FN, then compute.

    Accepts a single (CandidateSet, AnnotationSet) pair or two collections
    paired by slide_id; a slide present on only one side contributes all-FP or
    all-FN counts.
    """
    det_sets = [detections] if isinstance(detections, CandidateSet) else list(detections)
    gt_sets = [ground_truth] if isinstance(ground_truth, AnnotationSet) else list(ground_truth)
    det_by_slide: dict[str, CandidateSet] = {}
    for cand in det_sets:
        if cand.slide_id in det_by_slide:
            raise ValueError(f"duplicate candidate set for slide {cand.slide_id!r}")
        det_by_slide[cand.slide_id] = cand
    gt_by_slide: dict[str, AnnotationSet] = {}
    for gt in gt_sets:
        if gt.slide_id in gt_by_slide:
            raise ValueError(f"duplicate ground truth for slide {gt.slide_id!r}")
        gt_by_slide[gt.slide_id] = gt

    tp = fp = fn = 0
    for slide_id in sorted(set(det_by_slide) | set(gt_by_slide)):
        cand = det_by_slide.get(slide_id, CandidateSet(slide_id, ()))
        gt = gt_by_slide.get(slide_id, AnnotationSet(slide_id, (), box_size=1.0))
        result = match_greedy(cand, gt, criterion)
        tp += result.tp
        fp += len(result.fp)
        fn += len(result.fn)
    return metrics_from_counts(tp, fp, fn)
