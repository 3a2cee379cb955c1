# Scoring a detection run against ground truth.
#
# Ground truth is a list of annotated object centers per slide. A detection
# matches an annotation when its box center lies within 30 px of the
# annotation center (an IoU criterion is available too). Matching is
# one to one and greedy in score order: every detection claims the nearest
# free annotation, leftovers on either side become FPs and FNs.

from mitofuse import (
    Annotation,
    AnnotationSet,
    BBox,
    BoxIoU,
    CandidateSet,
    CenterDistance,
    Detection,
    evaluate,
    match_greedy,
    metrics_from_counts,
)

truth = AnnotationSet("slide-1", (
    Annotation(100.0, 100.0, "slide-1"),
    Annotation(400.0, 120.0, "slide-1"),
    Annotation(250.0, 500.0, "slide-1"),
), box_size=50.0)


def det(cx, cy, score):
    return Detection(BBox(cx - 25, cy - 25, cx + 25, cy + 25), score,
                     "model-a", "slide-1")


# Four detections: two good hits (slightly off-center, well within 30 px),
# one 200 px away from anything, and a duplicate of the first hit. The
# duplicate loses: one-to-one matching lets the higher-scoring detection
# claim the annotation and the second becomes a false positive.

detections = CandidateSet("slide-1", (
    det(104.0, 97.0, 0.95),
    det(395.0, 128.0, 0.80),
    det(600.0, 600.0, 0.75),
    det(108.0, 103.0, 0.60),
))

result = match_greedy(detections, truth, CenterDistance(radius=30.0))
print(f"TP={result.tp}  FP={len(result.fp)}  FN={len(result.fn)}")
for d, a in result.tp_pairs:
    print(f"  matched score {d.score:.2f} -> annotation ({a.center_x}, {a.center_y})")

# Counts turn into precision/recall/F1 the usual way. The report rounds
# nothing; format at print time.

report = metrics_from_counts(result.tp, len(result.fp), len(result.fn))
print(f"precision {report.precision:.4f}  recall {report.recall:.4f}  "
      f"f1 {report.f1:.4f}")

# evaluate() wraps match + count for one slide or a whole dataset; passing
# collections pairs detections and truth by slide_id and micro-averages the
# counts, which is how multi-slide test sets are scored.

combined = evaluate(detections, truth, CenterDistance(30.0))
print(f"evaluate() agrees: f1 {combined.f1:.4f}")

# The same run scored under box IoU >= 0.5 instead. Our duplicate overlaps
# its annotation box well, but the annotation is already taken; criteria
# change who matches, never the one-to-one discipline.

iou_report = evaluate(detections, truth, BoxIoU(threshold=0.5))
print(f"under IoU >= 0.5: precision {iou_report.precision:.4f}  "
      f"recall {iou_report.recall:.4f}")

# Edge conventions, fixed once so downstream tooling never divides by zero:
# no detections and no annotations is a perfect empty run; no detections
# against real annotations scores zero recall with precision 1 (nothing
# claimed, nothing wrong) and F1 0 when both factors vanish.

empty = metrics_from_counts(0, 0, 0)
print(f"empty run: precision {empty.precision}  recall {empty.recall}  f1 {empty.f1}")
missed = metrics_from_counts(0, 0, 5)
print(f"all missed: precision {missed.precision}  recall {missed.recall}  f1 {missed.f1}")
