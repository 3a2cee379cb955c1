"""Synthetic ground truth and parametric detector error models.

A Persona turns ground truth into the detection dump an imperfect detector
would emit: per-object misses, localization jitter, confidence draws, and a
Poisson background of false positives. Two personas can be steered toward
overlapping or complementary miss sets via their overlap_tag, which makes the
recall/F1 effect of pooling detectors measurable at desk scale with no trained
model anywhere.

Correlation mechanics, all keyed off one integer seed per trial:

- Misses: every annotation i gets a latent u_i ~ U[0,1) from a stream that
  does not depend on the persona. Persona p detects i iff
  frac(u_i + phase(p.overlap_tag)) < p.detect_prob. Equal tags give equal
  phases, hence nested miss pools; numeric tags are used as phases directly
  (mod 1), so the miss-set overlap of two personas is an exact circular-arc
  intersection you can dial; other tags hash to a stable phase.
- False positives: one shared per-trial pool of hallucination locations (kept
  min_separation away from every annotation); persona p consumes the pool
  prefix of length K_p ~ Poisson(fp_per_megapixel * slide megapixels). Shared
  prefixes mean ensembling does not stack independent background noise, which
  is how pooled fusion keeps its precision.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .evaluation import CenterDistance, MatchCriterion, MetricsReport, evaluate
from .fusion import CandidateSet, FusionConfig, fuse
from .geometry import Annotation, AnnotationSet, BBox, Detection

__all__ = [
    "ExperimentReport",
    "GtConfig",
    "Persona",
    "PlacementError",
    "detection_mask",
    "generate_ground_truth",
    "run_experiment",
    "simulate_detector",
]


class PlacementError(RuntimeError):
    """Rejection sampling could not place objects under the separation
    constraint; the configuration is too dense for the slide."""


@dataclass(frozen=True)
class GtConfig:
    """Layout of one synthetic slide's ground truth."""

    width: int
    height: int
    n_objects: int
    min_separation: float = 0.0
    box_size: float = 50.0
    slide_id: str = "synthetic"

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"slide must be at least 1x1, got {self.width}x{self.height}")
        if self.n_objects < 0:
            raise ValueError(f"n_objects must be >= 0, got {self.n_objects}")
        if self.min_separation < 0:
            raise ValueError(f"min_separation must be >= 0, got {self.min_separation}")
        if self.box_size <= 0:
            raise ValueError(f"box_size must be positive, got {self.box_size}")
        if self.n_objects > 0 and (self.box_size > self.width or self.box_size > self.height):
            raise ValueError(
                f"box_size {self.box_size} does not fit inside {self.width}x{self.height}"
            )

    @property
    def megapixels(self) -> float:
        return self.width * self.height / 1e6


@dataclass(frozen=True)
class Persona:
    """Stochastic error model of one detector.

    detect_prob: marginal probability of finding a ground-truth object.
    fp_per_megapixel: intensity of the false-positive background.
    jitter_sigma: per-axis Gaussian error of true-positive centers, px.
    tp_score / fp_score: (mean, spread) of the confidence draw, clamped to
        [0, 1].
    overlap_tag: miss-pool label; see the module docstring.
    name: stamped as model_id on every emitted detection.
    """

    name: str
    detect_prob: float
    fp_per_megapixel: float = 0.0
    jitter_sigma: float = 0.0
    tp_score: tuple[float, float] = (0.8, 0.08)
    fp_score: tuple[float, float] = (0.55, 0.1)
    overlap_tag: str = "0"

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("persona needs a non-empty name")
        if not 0.0 <= self.detect_prob <= 1.0:
            raise ValueError(f"detect_prob must be in [0, 1], got {self.detect_prob}")
        if self.fp_per_megapixel < 0:
            raise ValueError(f"fp_per_megapixel must be >= 0, got {self.fp_per_megapixel}")
        if self.jitter_sigma < 0:
            raise ValueError(f"jitter_sigma must be >= 0, got {self.jitter_sigma}")
        for label, (mean, spread) in (("tp_score", self.tp_score), ("fp_score", self.fp_score)):
            if not 0.0 <= mean <= 1.0 or spread < 0:
                raise ValueError(f"{label} must be (mean in [0,1], spread >= 0), got {(mean, spread)}")


def _stream(seed: int, *labels: str) -> np.random.Generator:
    """Independent deterministic substream for one purpose within one trial."""
    key = tuple(
        int.from_bytes(hashlib.blake2s(str(label).encode("utf-8")).digest()[:8], "big")
        for label in labels
    )
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def _miss_phase(tag: str) -> float:
    """Phase in [0, 1) of a persona's miss pool on the shared latent circle."""
    try:
        return float(tag) % 1.0
    except ValueError:
        digest = hashlib.blake2s(tag.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big") / 2.0**64


def generate_ground_truth(config: GtConfig, seed: int) -> AnnotationSet:
    """Rejection-sample object centers with pairwise min_separation.

    Centers stay box_size/2 away from the slide edge so every ground-truth box
    lies inside the slide. Raises PlacementError when the density is
    infeasible (attempt budget exhausted).
    """
    rng = _stream(seed, "ground-truth")
    half = 0.5 * config.box_size
    lo_x, hi_x = half, config.width - half
    lo_y, hi_y = half, config.height - half
    min_sep_sq = config.min_separation**2

    xs = np.empty(config.n_objects)
    ys = np.empty(config.n_objects)
    placed = 0
    budget = 1000 + 1000 * config.n_objects
    while placed < config.n_objects:
        if budget <= 0:
            raise PlacementError(
                f"placed only {placed}/{config.n_objects} objects at "
                f"min_separation {config.min_separation} on a "
                f"{config.width}x{config.height} slide"
            )
        budget -= 1
        x = rng.uniform(lo_x, hi_x)
        y = rng.uniform(lo_y, hi_y)
        if min_sep_sq > 0 and placed > 0:
            d2 = (xs[:placed] - x) ** 2 + (ys[:placed] - y) ** 2
            if float(d2.min()) < min_sep_sq:
                continue
        xs[placed] = x
        ys[placed] = y
        placed += 1

    annotations = tuple(
        Annotation(center_x=float(x), center_y=float(y), slide_id=config.slide_id)
        for x, y in zip(xs, ys)
    )
    return AnnotationSet(
        slide_id=config.slide_id, annotations=annotations, box_size=config.box_size
    )


def detection_mask(gt: AnnotationSet, persona: Persona, seed: int) -> np.ndarray:
    """Boolean per-annotation found/missed outcome for one persona.

    This is the event-level view of the miss model (the same mask
    simulate_detector realizes as boxes), handy for counting hits and misses
    directly.
    """
    latent = _stream(seed, "miss-latent").uniform(size=len(gt))
    phase = _miss_phase(persona.overlap_tag)
    return (latent + phase) % 1.0 < persona.detect_prob


def _clamped_scores(rng: np.random.Generator, dist: tuple[float, float], count: int) -> np.ndarray:
    mean, spread = dist
    return np.clip(rng.normal(mean, spread, size=count), 0.0, 1.0)


def _fp_pool(config: GtConfig, gt: AnnotationSet, seed: int, count: int) -> np.ndarray:
    """First `count` points of the trial's shared false-positive pool.

    Candidates come from one persona-independent stream in fixed-size batches
    (so the accepted sequence does not depend on how many points the caller
    asks for) and must stay min_separation away from every annotation.
    """
    if count == 0:
        return np.empty((0, 2))
    rng = _stream(seed, "fp-pool")
    ann_x = np.array([a.center_x for a in gt.annotations])
    ann_y = np.array([a.center_y for a in gt.annotations])
    min_sep_sq = config.min_separation**2
    points: list[np.ndarray] = []
    accepted = 0
    batches = 0
    max_batches = 50 + count
    while accepted < count:
        batches += 1
        if batches > max_batches:
            raise PlacementError(
                f"found only {accepted}/{count} false-positive sites away from "
                f"{len(gt)} annotations at min_separation {config.min_separation}"
            )
        cand = rng.uniform((0.0, 0.0), (config.width, config.height), size=(128, 2))
        if min_sep_sq > 0 and len(gt) > 0:
            d2 = (cand[:, 0:1] - ann_x) ** 2 + (cand[:, 1:2] - ann_y) ** 2
            cand = cand[d2.min(axis=1) >= min_sep_sq]
        points.append(cand)
        accepted += len(cand)
    return np.concatenate(points)[:count]


def simulate_detector(
    gt: AnnotationSet, persona: Persona, config: GtConfig, seed: int
) -> list[Detection]:
    """Emit the detection list this persona produces for one trial.

    True positives first (annotation order), then the false positives; every
    draw comes from a purpose-keyed substream of `seed`, so identical personas
    emit identical boxes and same-tag personas share jitter and FP sites.
    """
    n = len(gt)
    mask = detection_mask(gt, persona, seed)
    jitter = _stream(seed, "jitter", persona.overlap_tag).normal(
        0.0, persona.jitter_sigma, size=(n, 2)
    )
    tp_scores = _clamped_scores(
        _stream(seed, "tp-score", persona.overlap_tag), persona.tp_score, n
    )
    expected_fp = persona.fp_per_megapixel * config.megapixels
    fp_count = int(_stream(seed, "fp-count", persona.overlap_tag).poisson(expected_fp))
    fp_points = _fp_pool(config, gt, seed, fp_count)
    fp_scores = _clamped_scores(
        _stream(seed, "fp-score", persona.overlap_tag), persona.fp_score, fp_count
    )

    half = 0.5 * gt.box_size
    detections: list[Detection] = []
    for i, ann in enumerate(gt.annotations):
        if not mask[i]:
            continue
        cx = ann.center_x + jitter[i, 0]
        cy = ann.center_y + jitter[i, 1]
        detections.append(
            Detection(
                bbox=BBox(cx - half, cy - half, cx + half, cy + half),
                score=float(tp_scores[i]),
                model_id=persona.name,
                slide_id=gt.slide_id,
            )
        )
    for k in range(fp_count):
        cx, cy = fp_points[k]
        detections.append(
            Detection(
                bbox=BBox(cx - half, cy - half, cx + half, cy + half),
                score=float(fp_scores[k]),
                model_id=persona.name,
                slide_id=gt.slide_id,
            )
        )
    return detections


@dataclass(frozen=True)
class ExperimentReport:
    """Per-trial comparison of each persona alone against their fusion."""

    seed: int
    persona_metrics: dict[str, MetricsReport]
    fused_metrics: MetricsReport
    config: dict = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "personas": {name: m.to_dict() for name, m in self.persona_metrics.items()},
            "fused": self.fused_metrics.to_dict(),
        }


def _criterion_dict(criterion: MatchCriterion) -> dict:
    if isinstance(criterion, CenterDistance):
        return {"criterion": "center_distance", "radius": criterion.radius}
    return {"criterion": "box_iou", "threshold": criterion.threshold}


def _run_trial(
    gt_config: GtConfig,
    personas: tuple[Persona, Persona],
    fusion_config: FusionConfig,
    criterion: MatchCriterion,
    seed: int,
    echo: dict,
) -> ExperimentReport:
    gt = generate_ground_truth(gt_config, seed)
    dumps = {p.name: simulate_detector(gt, p, gt_config, seed) for p in personas}
    persona_metrics = {
        name: evaluate(
            fuse({name: dets}, None, fusion_config, slide_id=gt.slide_id), gt, criterion
        )
        for name, dets in dumps.items()
    }
    fused = fuse(dumps, None, fusion_config, slide_id=gt.slide_id)
    fused_metrics = evaluate(fused, gt, criterion)
    return ExperimentReport(
        seed=seed, persona_metrics=persona_metrics, fused_metrics=fused_metrics, config=echo
    )


def run_experiment(
    gt_config: GtConfig,
    persona_a: Persona,
    persona_b: Persona,
    fusion_config: FusionConfig = FusionConfig(),
    criterion: MatchCriterion = CenterDistance(),
    n_seeds: int = 100,
    base_seed: int = 0,
    workers: int = 1,
) -> list[ExperimentReport]:
    """Repeat generate -> simulate -> fuse -> evaluate over independent trials.

    Trial k uses seed base_seed + k. Reports come back in seed order whatever
    the worker count; parallelism cannot change any value.
    """
    if persona_a.name == persona_b.name:
        raise ValueError(f"personas must have distinct names, both are {persona_a.name!r}")
    if n_seeds < 1:
        raise ValueError(f"n_seeds must be >= 1, got {n_seeds}")
    personas = (persona_a, persona_b)
    echo = {
        "ground_truth": asdict(gt_config),
        "personas": [asdict(p) for p in personas],
        "fusion": asdict(fusion_config),
        "evaluation": _criterion_dict(criterion),
        "n_seeds": n_seeds,
        "base_seed": base_seed,
    }
    seeds = [base_seed + k for k in range(n_seeds)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(
                pool.map(
                    lambda s: _run_trial(gt_config, personas, fusion_config, criterion, s, echo),
                    seeds,
                )
            )
    return [_run_trial(gt_config, personas, fusion_config, criterion, s, echo) for s in seeds]
