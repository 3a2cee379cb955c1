# Fusing the raw output of several detectors into one candidate list.
#
# Each detector emits scored boxes per tile. Fusion is three steps: drop
# low-confidence boxes (score >= 0.399 survives), translate everything to
# slide coordinates, then greedy non-maximum suppression at IoU 0.4 across
# the pooled boxes of all models. Boxes from different models that agree on
# a location collapse to the single highest-scoring one.

from mitofuse import (
    BBox,
    CandidateSet,
    Detection,
    FusionConfig,
    SlideInfo,
    fuse,
    iou,
    nms,
    plan_tiles,
)

slide = SlideInfo("demo-slide", 2048, 2048)
plan = plan_tiles(slide, tile_size=1024)


def det(x1, y1, x2, y2, score, model, tile_index=None):
    frame = "global" if tile_index is None else "local"
    return Detection(BBox(x1, y1, x2, y2), score, model, "demo-slide",
                     frame=frame, tile_index=tile_index)


# Three detectors looked at the same slide. Two of them found the same
# object near (500, 500) with slightly different boxes, one of them also
# produced a low-confidence blip, and the third found a second object that
# the others missed. Model b reports tile-local boxes, so the fuse step
# gets the tile plan to translate them.

per_model = {
    "model-a": [
        det(490.0, 490.0, 540.0, 540.0, 0.91, "model-a"),
        det(1500.0, 300.0, 1550.0, 350.0, 0.21, "model-a"),  # below the gate
    ],
    "model-b": [
        det(494.0, 486.0, 546.0, 538.0, 0.84, "model-b", tile_index=0),
        det(276.0, 700.0, 326.0, 750.0, 0.77, "model-b", tile_index=1),
    ],
    "model-c": [],
}

fused = fuse(per_model, tile_plan=plan)
print(f"{sum(len(v) for v in per_model.values())} raw detections -> "
      f"{len(fused.detections)} fused")
for d in fused.detections:
    print(f"  kept {d.bbox} score {d.score:.2f} from {d.model_id}")

# Why did model-a's box win at (500, 500)? Its score is higher, and the two
# boxes overlap far above the 0.4 threshold:

a = BBox(490.0, 490.0, 540.0, 540.0)
b = BBox(494.0, 486.0, 546.0, 538.0)
print(f"\nIoU of the agreeing pair: {iou(a, b):.3f} (>= 0.4 suppresses)")

# Suppression is greedy in a total order: score first, then x1, y1 and
# model id as tie breaks. The tie rule makes the output a pure function of
# the candidate set, so shuffling the input changes nothing:

candidates = CandidateSet("demo-slide", tuple(
    d for ds in per_model.values() for d in ds if d.frame == "global"
))
shuffled = CandidateSet("demo-slide", tuple(reversed(candidates.detections)))
print(f"order-invariant: {nms(candidates).detections == nms(shuffled).detections}")

# The operating point lives in FusionConfig; loosening the score gate lets
# the 0.21 blip through as its own cluster.

loose = fuse(per_model, tile_plan=plan, config=FusionConfig(score_threshold=0.2))
print(f"with score gate 0.2: {len(loose.detections)} fused boxes")
