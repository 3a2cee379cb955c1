# Why fusing two imperfect detectors beats either one: a desk-scale check.
#
# Two synthetic detector personas look at the same ground truth. Each one
# misses a persona-specific slice of the objects and sprinkles in false
# positives. The interesting knob is the overlap_tag: personas share a
# latent variable per object, and the tag offsets which slice of objects
# they miss. Same tag means same misses (fusion gains nothing); offset tags
# mean partially disjoint misses, and the union recovers objects neither
# detector would report alone.

import numpy as np

from mitofuse import (
    CenterDistance,
    FusionConfig,
    GtConfig,
    Persona,
    detection_mask,
    generate_ground_truth,
    run_experiment,
)

gt_config = GtConfig(width=4000, height=4000, n_objects=300,
                     min_separation=120.0, box_size=50.0, slide_id="sim")

# Persona A finds 78% of objects, persona B 84%. Their miss pools are
# offset by 0.10 on the latent circle, so B rescues some of A's misses.

persona_a = Persona("det-a", detect_prob=0.78, fp_per_megapixel=1.5,
                    jitter_sigma=3.0, overlap_tag="0.0")
persona_b = Persona("det-b", detect_prob=0.84, fp_per_megapixel=1.8,
                    jitter_sigma=3.0, overlap_tag="0.10")

# The detection masks expose the latent mechanism directly: per object,
# did the persona report it? The union is what a perfect fusion could
# recover, recall 0.78 + 0.10 = 0.88 in expectation.

gt = generate_ground_truth(gt_config, seed=0)
mask_a = detection_mask(gt, persona_a, seed=0)
mask_b = detection_mask(gt, persona_b, seed=0)
print(f"seed 0: A found {mask_a.sum()}, B found {mask_b.sum()}, "
      f"union {(mask_a | mask_b).sum()} of {len(gt)} objects")

# Now the full pipeline over 20 independent trials: generate ground truth,
# simulate both personas, fuse their boxes with score gate + NMS, and score
# everyone against the truth at a 30 px center-distance criterion.

reports = run_experiment(
    gt_config, persona_a, persona_b,
    fusion_config=FusionConfig(),
    criterion=CenterDistance(30.0),
    n_seeds=20, base_seed=0,
)

print(f"\n{'seed':>4}  {'A recall':>8}  {'B recall':>8}  {'fused':>8}  {'fused f1':>8}")
for r in reports[:8]:
    pa = r.persona_metrics["det-a"]
    pb = r.persona_metrics["det-b"]
    print(f"{r.seed:>4}  {pa.recall:8.4f}  {pb.recall:8.4f}  "
          f"{r.fused_metrics.recall:8.4f}  {r.fused_metrics.f1:8.4f}")
print("   ... (20 trials total)")

recall_wins = sum(
    r.fused_metrics.recall > max(m.recall for m in r.persona_metrics.values())
    for r in reports
)
f1_wins = sum(
    r.fused_metrics.f1 > max(m.f1 for m in r.persona_metrics.values())
    for r in reports
)
mean_fused = float(np.mean([r.fused_metrics.recall for r in reports]))
print(f"\nfused recall beats both detectors in {recall_wins}/20 trials")
print(f"fused f1 beats both detectors in {f1_wins}/20 trials")
print(f"mean fused recall {mean_fused:.4f} (union design value 0.88)")

# The f1 wins are the stronger statement: fusion pools false positives from
# both detectors, so precision drops a little, and the recall gain still
# pays for it. Rerun with overlap_tag '0.0' on both personas and the gap
# collapses to B's solo numbers: identical misses leave nothing to rescue.
