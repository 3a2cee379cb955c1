"""mitofuse: tile-aware detection fusion, evaluation, augmentation, and
detector simulation for mitotic-figure pipelines.

The package covers everything around the neural detector: planning tile grids
over whole-slide images, mapping tile-local detections to slide coordinates,
pooling multi-model outputs through score thresholding and greedy NMS,
center-distance/IoU evaluation, label-aware patch augmentation, and a
synthetic detector simulator for studying when ensembling helps.
"""

from .augment import (
    AugSeed,
    LabeledPatch,
    cutmix,
    gaussian_blur,
    gaussian_kernel,
    gaussian_noise,
    hsv_shift,
    hsv_to_rgb,
    mosaic,
    rgb_to_hsv,
    sharpen,
)
from .evaluation import (
    BoxIoU,
    CenterDistance,
    MatchCriterion,
    MatchResult,
    MetricsReport,
    evaluate,
    f1_score,
    match_greedy,
    metrics_from_counts,
)
from .fusion import (
    DEFAULT_NMS_IOU,
    DEFAULT_SCORE_THRESHOLD,
    CandidateSet,
    FusionConfig,
    fuse,
    merge_model_outputs,
    nms,
    nms_bruteforce,
    nms_sort_key,
    threshold_detections,
)
from .geometry import (
    FRAME_GLOBAL,
    FRAME_LOCAL,
    Annotation,
    AnnotationSet,
    BBox,
    Detection,
    SlideInfo,
    center_distance,
    clip_box,
    iou,
)
from .io import (
    DatasetManifest,
    DumpFormatError,
    RoiRecord,
    load_manifest,
    load_tile_plan,
    read_dump,
    save_manifest,
    save_metrics,
    save_tile_plan,
    split_rois,
    write_dump,
)
from .simulate import (
    ExperimentReport,
    GtConfig,
    Persona,
    PlacementError,
    detection_mask,
    generate_ground_truth,
    run_experiment,
    simulate_detector,
)
from .tiling import (
    DEFAULT_TILE_SIZE,
    FrameMismatchError,
    Tile,
    TilePlan,
    plan_tiles,
    to_global,
    to_local,
)

__version__ = "0.1.0"

__all__ = [
    "AugSeed",
    "Annotation",
    "AnnotationSet",
    "BBox",
    "BoxIoU",
    "CandidateSet",
    "CenterDistance",
    "DEFAULT_NMS_IOU",
    "DEFAULT_SCORE_THRESHOLD",
    "DEFAULT_TILE_SIZE",
    "DatasetManifest",
    "Detection",
    "DumpFormatError",
    "ExperimentReport",
    "FRAME_GLOBAL",
    "FRAME_LOCAL",
    "FrameMismatchError",
    "FusionConfig",
    "GtConfig",
    "LabeledPatch",
    "MatchCriterion",
    "MatchResult",
    "MetricsReport",
    "Persona",
    "PlacementError",
    "RoiRecord",
    "SlideInfo",
    "Tile",
    "TilePlan",
    "center_distance",
    "clip_box",
    "cutmix",
    "detection_mask",
    "evaluate",
    "f1_score",
    "fuse",
    "gaussian_blur",
    "gaussian_kernel",
    "gaussian_noise",
    "generate_ground_truth",
    "hsv_shift",
    "hsv_to_rgb",
    "iou",
    "load_manifest",
    "load_tile_plan",
    "match_greedy",
    "merge_model_outputs",
    "metrics_from_counts",
    "mosaic",
    "nms",
    "nms_bruteforce",
    "nms_sort_key",
    "plan_tiles",
    "read_dump",
    "rgb_to_hsv",
    "run_experiment",
    "save_manifest",
    "save_metrics",
    "save_tile_plan",
    "sharpen",
    "simulate_detector",
    "split_rois",
    "threshold_detections",
    "to_global",
    "to_local",
    "write_dump",
]
