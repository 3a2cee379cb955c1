import math

import numpy as np
import pytest

from mitofuse import (
    CenterDistance,
    FusionConfig,
    GtConfig,
    Persona,
    PlacementError,
    detection_mask,
    evaluate,
    fuse,
    generate_ground_truth,
    run_experiment,
    simulate_detector,
)


BASE = GtConfig(width=4000, height=4000, n_objects=200, min_separation=100.0, box_size=50.0)


def perfect(name="det", **overrides):
    kwargs = dict(
        name=name,
        detect_prob=1.0,
        fp_per_megapixel=0.0,
        jitter_sigma=0.0,
        tp_score=(0.9, 0.0),
    )
    kwargs.update(overrides)
    return Persona(**kwargs)


class TestGenerateGroundTruth:
    def test_counts_and_bounds(self):
        gt = generate_ground_truth(BASE, seed=0)
        assert len(gt) == 200
        half = BASE.box_size / 2
        for ann in gt:
            assert half <= ann.center_x <= BASE.width - half
            assert half <= ann.center_y <= BASE.height - half

    def test_min_separation_holds(self):
        gt = generate_ground_truth(BASE, seed=1)
        pts = [(a.center_x, a.center_y) for a in gt]
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                d = math.hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1])
                assert d >= BASE.min_separation

    def test_deterministic(self):
        assert generate_ground_truth(BASE, seed=5) == generate_ground_truth(BASE, seed=5)
        assert generate_ground_truth(BASE, seed=5) != generate_ground_truth(BASE, seed=6)

    def test_zero_objects(self):
        cfg = GtConfig(width=1000, height=1000, n_objects=0)
        assert len(generate_ground_truth(cfg, seed=0)) == 0

    def test_infeasible_density_raises(self):
        cfg = GtConfig(width=1000, height=1000, n_objects=50, min_separation=1000.0)
        with pytest.raises(PlacementError):
            generate_ground_truth(cfg, seed=0)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            GtConfig(width=0, height=100, n_objects=1)
        with pytest.raises(ValueError):
            GtConfig(width=100, height=100, n_objects=-1)
        with pytest.raises(ValueError):
            GtConfig(width=40, height=40, n_objects=1, box_size=50.0)


class TestDetectionMask:
    def test_perfect_and_blind(self):
        gt = generate_ground_truth(BASE, seed=2)
        assert detection_mask(gt, perfect(), seed=2).all()
        blind = perfect(detect_prob=0.0)
        assert not detection_mask(gt, blind, seed=2).any()

    def test_marginal_rate(self):
        cfg = GtConfig(width=8000, height=8000, n_objects=2000, min_separation=60.0)
        gt = generate_ground_truth(cfg, seed=3)
        mask = detection_mask(gt, perfect(detect_prob=0.8), seed=3)
        # binomial(2000, 0.8): 4 standard errors is about 0.036
        assert abs(mask.mean() - 0.8) < 0.04

    def test_same_tag_gives_nested_misses(self):
        gt = generate_ground_truth(BASE, seed=4)
        lo = detection_mask(gt, perfect(detect_prob=0.7, overlap_tag="0.0"), seed=4)
        hi = detection_mask(gt, perfect(detect_prob=0.9, overlap_tag="0.0"), seed=4)
        # sharing the latent circle at the same phase: whatever the weaker
        # detector finds, the stronger one finds too
        assert (hi | ~lo).all()

    def test_phase_separation_makes_misses_complementary(self):
        gt = generate_ground_truth(BASE, seed=5)
        a = detection_mask(gt, perfect(detect_prob=0.9, overlap_tag="0.0"), seed=5)
        b = detection_mask(gt, perfect(detect_prob=0.9, overlap_tag="0.5"), seed=5)
        # miss arcs [0.9, 1.0) and [0.4, 0.5) are disjoint
        assert (a | b).all()

    def test_non_numeric_tags_hash_to_stable_phase(self):
        gt = generate_ground_truth(BASE, seed=6)
        a = detection_mask(gt, perfect(detect_prob=0.8, overlap_tag="resnet"), seed=6)
        b = detection_mask(gt, perfect(detect_prob=0.8, overlap_tag="resnet"), seed=6)
        c = detection_mask(gt, perfect(detect_prob=0.8, overlap_tag="efficientnet"), seed=6)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)


class TestSimulateDetector:
    def test_perfect_persona_reproduces_ground_truth(self):
        gt = generate_ground_truth(BASE, seed=7)
        dets = simulate_detector(gt, perfect(), BASE, seed=7)
        assert len(dets) == len(gt)
        for det, ann in zip(dets, gt):
            assert det.bbox == ann.box(gt.box_size)
            assert det.score == 0.9
        metrics = evaluate(
            fuse({"det": dets}, None, FusionConfig(), slide_id=gt.slide_id), gt, CenterDistance()
        )
        assert (metrics.precision, metrics.recall, metrics.f1) == (1.0, 1.0, 1.0)

    def test_blind_persona_emits_nothing(self):
        gt = generate_ground_truth(BASE, seed=8)
        dets = simulate_detector(gt, perfect(detect_prob=0.0), BASE, seed=8)
        assert dets == []

    def test_deterministic(self):
        gt = generate_ground_truth(BASE, seed=9)
        p = perfect(detect_prob=0.8, fp_per_megapixel=1.0, jitter_sigma=2.0)
        assert simulate_detector(gt, p, BASE, seed=9) == simulate_detector(gt, p, BASE, seed=9)

    def test_identical_personas_identical_output(self):
        gt = generate_ground_truth(BASE, seed=10)
        a = perfect(name="a", detect_prob=0.8, fp_per_megapixel=1.5, jitter_sigma=2.0, overlap_tag="0.1")
        b = perfect(name="b", detect_prob=0.8, fp_per_megapixel=1.5, jitter_sigma=2.0, overlap_tag="0.1")
        dets_a = simulate_detector(gt, a, BASE, seed=10)
        dets_b = simulate_detector(gt, b, BASE, seed=10)
        assert [(d.bbox, d.score) for d in dets_a] == [(d.bbox, d.score) for d in dets_b]

    def test_false_positives_respect_separation(self):
        gt = generate_ground_truth(BASE, seed=11)
        p = perfect(detect_prob=0.0, fp_per_megapixel=3.0)
        dets = simulate_detector(gt, p, BASE, seed=11)
        assert len(dets) > 0
        for det in dets:
            cx, cy = det.bbox.center()
            for ann in gt:
                assert math.hypot(cx - ann.center_x, cy - ann.center_y) >= BASE.min_separation

    def test_fp_pools_are_nested_across_personas(self):
        gt = generate_ground_truth(BASE, seed=12)
        few = perfect(detect_prob=0.0, fp_per_megapixel=1.0, overlap_tag="a")
        many = perfect(detect_prob=0.0, fp_per_megapixel=3.0, overlap_tag="b")
        dets_few = simulate_detector(gt, few, BASE, seed=12)
        dets_many = simulate_detector(gt, many, BASE, seed=12)
        assert len(dets_few) < len(dets_many)
        boxes_few = [d.bbox for d in dets_few]
        boxes_many = [d.bbox for d in dets_many]
        assert boxes_many[: len(boxes_few)] == boxes_few

    def test_jitter_moves_centers(self):
        gt = generate_ground_truth(BASE, seed=13)
        p = perfect(jitter_sigma=3.0)
        dets = simulate_detector(gt, p, BASE, seed=13)
        offsets = [
            math.hypot(d.bbox.center()[0] - a.center_x, d.bbox.center()[1] - a.center_y)
            for d, a in zip(dets, gt)
        ]
        mean_offset = sum(offsets) / len(offsets)
        # Rayleigh mean is sigma * sqrt(pi/2), about 3.76 for sigma 3
        assert 3.0 < mean_offset < 4.6

    def test_scores_clamped(self):
        gt = generate_ground_truth(BASE, seed=14)
        p = perfect(tp_score=(0.95, 0.5))
        dets = simulate_detector(gt, p, BASE, seed=14)
        assert all(0.0 <= d.score <= 1.0 for d in dets)


class TestRunExperiment:
    def test_reports_in_seed_order_and_deterministic(self):
        a = perfect(name="a", detect_prob=0.8, overlap_tag="0.0")
        b = perfect(name="b", detect_prob=0.85, overlap_tag="0.25")
        runs = run_experiment(BASE, a, b, n_seeds=5, base_seed=100)
        assert [r.seed for r in runs] == [100, 101, 102, 103, 104]
        again = run_experiment(BASE, a, b, n_seeds=5, base_seed=100)
        assert [r.fused_metrics for r in again] == [r.fused_metrics for r in runs]

    def test_workers_do_not_change_results(self):
        a = perfect(name="a", detect_prob=0.8, overlap_tag="0.0")
        b = perfect(name="b", detect_prob=0.85, overlap_tag="0.25")
        serial = run_experiment(BASE, a, b, n_seeds=6, base_seed=0)
        threaded = run_experiment(BASE, a, b, n_seeds=6, base_seed=0, workers=4)
        assert [r.to_dict() for r in serial] == [r.to_dict() for r in threaded]

    def test_fused_recall_never_below_personas(self):
        # pooling with zero FPs can only add found objects
        a = perfect(name="a", detect_prob=0.75, overlap_tag="0.0")
        b = perfect(name="b", detect_prob=0.8, overlap_tag="0.1")
        for r in run_experiment(BASE, a, b, n_seeds=10):
            best = max(m.recall for m in r.persona_metrics.values())
            assert r.fused_metrics.recall >= best
            assert r.fused_metrics.precision == 1.0

    def test_identical_personas_fuse_to_single_metrics(self):
        a = perfect(name="a", detect_prob=0.8, fp_per_megapixel=1.0, jitter_sigma=2.0, overlap_tag="x")
        b = perfect(name="b", detect_prob=0.8, fp_per_megapixel=1.0, jitter_sigma=2.0, overlap_tag="x")
        for r in run_experiment(BASE, a, b, n_seeds=5):
            assert r.fused_metrics == r.persona_metrics["a"]
            assert r.fused_metrics == r.persona_metrics["b"]

    def test_duplicate_names_rejected(self):
        p = perfect(name="same")
        with pytest.raises(ValueError):
            run_experiment(BASE, p, p, n_seeds=1)

    def test_config_echo(self):
        a = perfect(name="a", overlap_tag="0.0")
        b = perfect(name="b", overlap_tag="0.1")
        (r,) = run_experiment(BASE, a, b, n_seeds=1, base_seed=9)
        assert r.config["ground_truth"]["n_objects"] == BASE.n_objects
        assert [p["name"] for p in r.config["personas"]] == ["a", "b"]
        assert r.config["base_seed"] == 9

    def test_persona_validation(self):
        with pytest.raises(ValueError):
            Persona(name="", detect_prob=0.5)
        with pytest.raises(ValueError):
            Persona(name="p", detect_prob=1.5)
        with pytest.raises(ValueError):
            Persona(name="p", detect_prob=0.5, fp_per_megapixel=-1.0)
        with pytest.raises(ValueError):
            Persona(name="p", detect_prob=0.5, tp_score=(1.5, 0.1))
