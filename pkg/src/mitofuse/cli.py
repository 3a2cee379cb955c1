"""Command-line entry points: tile, fuse, eval, augment, simulate.

Data errors (bad files, malformed dumps, infeasible configs) exit 1 with a
one-line message on stderr; argparse usage errors exit 2 with the usage text.
Worker counts default to the MITOFUSE_THREADS environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from PIL import Image

from . import io as mio
from .augment import (
    AugSeed,
    LabeledPatch,
    cutmix,
    gaussian_blur,
    gaussian_noise,
    hsv_shift,
    mosaic,
    sharpen,
)
from .evaluation import BoxIoU, CenterDistance, MetricsReport, evaluate, metrics_from_counts
from .fusion import (
    DEFAULT_NMS_IOU,
    DEFAULT_SCORE_THRESHOLD,
    CandidateSet,
    FusionConfig,
    fuse,
)
from .geometry import BBox, SlideInfo
from .simulate import GtConfig, Persona, run_experiment
from .tiling import DEFAULT_TILE_SIZE, plan_tiles

__all__ = ["build_parser", "main"]


def _default_threads() -> int:
    raw = os.environ.get("MITOFUSE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mitofuse",
        description="Tile-aware detection fusion, evaluation, augmentation, and simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_tile = sub.add_parser("tile", help="write the tile plan for one slide")
    p_tile.add_argument("--slide-id", required=True)
    p_tile.add_argument("--width", type=int, required=True)
    p_tile.add_argument("--height", type=int, required=True)
    p_tile.add_argument("--mpp", type=float, default=None, help="microns per pixel")
    p_tile.add_argument("--tile-size", type=int, default=DEFAULT_TILE_SIZE)
    p_tile.add_argument("--overlap", type=int, default=0)
    p_tile.add_argument("-o", "--output", required=True, help="tile plan JSON path")

    p_fuse = sub.add_parser("fuse", help="threshold, pool, and NMS detection dumps")
    p_fuse.add_argument("dumps", nargs="+", help="detection dump JSONL files")
    p_fuse.add_argument("--tile-plan", default=None, help="tile plan JSON for local-frame dumps")
    p_fuse.add_argument("--score-threshold", type=float, default=DEFAULT_SCORE_THRESHOLD)
    p_fuse.add_argument("--nms-iou", type=float, default=DEFAULT_NMS_IOU)
    p_fuse.add_argument("--threads", type=int, default=_default_threads())
    p_fuse.add_argument("-o", "--output", required=True, help="fused dump JSONL path")

    p_eval = sub.add_parser("eval", help="score a detection dump against a manifest")
    p_eval.add_argument("dump", help="detection dump JSONL (typically fused)")
    p_eval.add_argument("manifest", help="dataset manifest JSON")
    group = p_eval.add_mutually_exclusive_group()
    group.add_argument("--radius", type=float, default=None, help="center-distance radius, px (default 30)")
    group.add_argument("--iou-threshold", type=float, default=None, help="match by box IoU instead")
    p_eval.add_argument("--split", choices=["train", "test"], default=None, help="restrict to one split")
    p_eval.add_argument("-o", "--output", default=None, help="aggregate metrics JSON path")

    p_aug = sub.add_parser("augment", help="augment image patches (PNG + optional box sidecars)")
    p_aug.add_argument("inputs", nargs="+", help="input images; 4 for --mosaic, 2 for --cutmix")
    p_aug.add_argument("--seed", type=int, required=True)
    p_aug.add_argument("--hsv-shift", default=None, metavar="H,S,V", help="hue shift deg, sat scale, val scale")
    p_aug.add_argument("--blur-sigma", type=float, default=None)
    p_aug.add_argument("--sharpen", default=None, metavar="AMOUNT[,SIGMA]")
    p_aug.add_argument("--noise-sigma", type=float, default=None)
    p_aug.add_argument("--mosaic", action="store_true", help="compose 4 inputs into one mosaic")
    p_aug.add_argument("--cutmix", action="store_true", help="paste a source rect into a target")
    p_aug.add_argument("--out-size", type=int, default=None, help="mosaic canvas size")
    p_aug.add_argument("-o", "--outdir", required=True)

    p_sim = sub.add_parser("simulate", help="run a two-detector ensembling experiment")
    p_sim.add_argument("config", help="experiment config, JSON or TOML")
    p_sim.add_argument("--threads", type=int, default=_default_threads())
    p_sim.add_argument("-o", "--output", required=True, help="experiment report JSON path")

    return parser


def _cmd_tile(args: argparse.Namespace) -> int:
    slide = SlideInfo(args.slide_id, args.width, args.height, args.mpp)
    plan = plan_tiles(slide, tile_size=args.tile_size, overlap=args.overlap)
    mio.save_tile_plan(plan, args.output)
    print(f"{len(plan)} tiles for slide {slide.slide_id!r} ({slide.width}x{slide.height}) -> {args.output}")
    return 0


def _cmd_fuse(args: argparse.Namespace) -> int:
    plan = mio.load_tile_plan(args.tile_plan) if args.tile_plan else None
    config = FusionConfig(score_threshold=args.score_threshold, nms_iou_threshold=args.nms_iou)

    # model_id -> slide_id -> detections, merged across input files
    by_slide: dict[str, dict[str, list]] = {}
    for path in args.dumps:
        for model_id, dets in mio.read_dump(path).items():
            for det in dets:
                by_slide.setdefault(det.slide_id, {}).setdefault(model_id, []).append(det)

    if plan is not None:
        for slide_id in by_slide:
            if slide_id != plan.slide.slide_id and any(
                d.frame == "local" for dets in by_slide[slide_id].values() for d in dets
            ):
                raise ValueError(
                    f"tile plan is for slide {plan.slide.slide_id!r} but dump has "
                    f"local-frame detections for {slide_id!r}"
                )

    slide_ids = sorted(by_slide)
    fuse_one = lambda sid: fuse(by_slide[sid], plan, config, slide_id=sid)
    if args.threads > 1 and len(slide_ids) > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            fused = list(pool.map(fuse_one, slide_ids))
    else:
        fused = [fuse_one(sid) for sid in slide_ids]

    kept = [det for cand in fused for det in cand.detections]
    mio.write_dump(args.output, kept)
    total_in = sum(len(dets) for models in by_slide.values() for dets in models.values())
    print(f"fused {total_in} detections on {len(slide_ids)} slide(s) -> {len(kept)} kept -> {args.output}")
    return 0


def _metrics_row(label: str, m: MetricsReport) -> str:
    return (
        f"{label:<16} {m.tp:>6} {m.fp:>6} {m.fn:>6} "
        f"{m.precision:>9.4f} {m.recall:>7.4f} {m.f1:>7.4f}"
    )


def _cmd_eval(args: argparse.Namespace) -> int:
    groups = mio.read_dump(args.dump)
    manifest = mio.load_manifest(args.manifest)
    if args.iou_threshold is not None:
        criterion = BoxIoU(threshold=args.iou_threshold)
    else:
        criterion = CenterDistance(radius=args.radius if args.radius is not None else 30.0)

    gt_sets = manifest.annotation_sets(split=args.split)
    if not gt_sets:
        raise ValueError(f"manifest has no ROIs in split {args.split!r}")
    gt_slides = {gt.slide_id for gt in gt_sets}

    per_slide: dict[str, list] = {gt.slide_id: [] for gt in gt_sets}
    ignored = set()
    for dets in groups.values():
        for det in dets:
            if det.slide_id in per_slide:
                per_slide[det.slide_id].append(det)
            else:
                ignored.add(det.slide_id)
    if ignored:
        print(f"note: ignoring detections on {len(ignored)} slide(s) outside the "
              f"evaluated set: {sorted(ignored)}", file=sys.stderr)

    print(f"{'slide':<16} {'tp':>6} {'fp':>6} {'fn':>6} {'precision':>9} {'recall':>7} {'f1':>7}")
    tp = fp = fn = 0
    for gt in gt_sets:
        cand = CandidateSet(gt.slide_id, tuple(per_slide[gt.slide_id]))
        m = evaluate(cand, gt, criterion)
        tp, fp, fn = tp + m.tp, fp + m.fp, fn + m.fn
        print(_metrics_row(gt.slide_id, m))
    total = metrics_from_counts(tp, fp, fn)
    print(_metrics_row("TOTAL", total))
    if args.output:
        mio.save_metrics(total, args.output)
    return 0


def _load_labeled(path: Path) -> LabeledPatch:
    patch = np.asarray(Image.open(path).convert("RGB"), dtype=np.uint8)
    sidecar = path.with_suffix(".json")
    boxes: list[BBox] = []
    if sidecar.exists():
        with open(sidecar, encoding="utf-8") as fh:
            obj = json.load(fh)
        boxes = [BBox(*map(float, b)) for b in obj.get("boxes", [])]
    return LabeledPatch(patch, tuple(boxes))


def _save_labeled(lp: LabeledPatch, path: Path) -> None:
    Image.fromarray(lp.patch).save(path)
    with open(path.with_suffix(".json"), "w", encoding="utf-8") as fh:
        json.dump({"boxes": [[b.x1, b.y1, b.x2, b.y2] for b in lp.boxes]}, fh, indent=2)
        fh.write("\n")


def _parse_floats(raw: str, n_min: int, n_max: int, flag: str) -> list[float]:
    parts = raw.split(",")
    if not n_min <= len(parts) <= n_max:
        raise ValueError(f"{flag} expects {n_min}..{n_max} comma-separated numbers, got {raw!r}")
    return [float(p) for p in parts]


def _cmd_augment(args: argparse.Namespace) -> int:
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    inputs = [Path(p) for p in args.inputs]
    seed = args.seed

    if args.mosaic and args.cutmix:
        raise ValueError("--mosaic and --cutmix are mutually exclusive")
    if args.mosaic:
        if len(inputs) != 4:
            raise ValueError(f"--mosaic needs exactly 4 inputs, got {len(inputs)}")
        if args.out_size is None:
            raise ValueError("--mosaic needs --out-size")
        patches = [_load_labeled(p) for p in inputs]
        out = mosaic(patches, args.out_size, AugSeed(seed))
        _save_labeled(out, outdir / "mosaic.png")
        print(f"mosaic of {len(inputs)} patches ({len(out.boxes)} boxes) -> {outdir / 'mosaic.png'}")
        return 0
    if args.cutmix:
        if len(inputs) != 2:
            raise ValueError(f"--cutmix needs exactly 2 inputs (target, source), got {len(inputs)}")
        target, source = (_load_labeled(p) for p in inputs)
        out = cutmix(target, source, AugSeed(seed))
        _save_labeled(out, outdir / "cutmix.png")
        print(f"cutmix ({len(out.boxes)} boxes) -> {outdir / 'cutmix.png'}")
        return 0

    hsv = _parse_floats(args.hsv_shift, 3, 3, "--hsv-shift") if args.hsv_shift else None
    sharp = _parse_floats(args.sharpen, 1, 2, "--sharpen") if args.sharpen else None
    # Pixel ops apply in a fixed order: hsv -> blur -> sharpen -> noise.
    # Input k draws from sequence k of the run seed.
    for k, path in enumerate(inputs):
        lp = _load_labeled(path)
        patch = lp.patch
        if hsv is not None:
            patch = hsv_shift(patch, *hsv)
        if args.blur_sigma is not None:
            patch = gaussian_blur(patch, args.blur_sigma)
        if sharp is not None:
            patch = sharpen(patch, sharp[0], sharp[1] if len(sharp) > 1 else 1.0)
        if args.noise_sigma is not None:
            patch = gaussian_noise(patch, args.noise_sigma, AugSeed(seed, sequence=k))
        out_path = outdir / f"{path.stem}_aug.png"
        _save_labeled(LabeledPatch(patch, lp.boxes), out_path)
        print(f"{path} -> {out_path}")
    return 0


def _load_experiment_config(path: str) -> dict:
    if path.endswith(".toml"):
        try:
            import tomllib
        except ImportError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _persona_from_obj(obj: dict) -> Persona:
    kwargs = dict(obj)
    for key in ("tp_score", "fp_score"):
        if key in kwargs:
            kwargs[key] = tuple(float(v) for v in kwargs[key])
    return Persona(**kwargs)


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load_experiment_config(args.config)
    try:
        gt_config = GtConfig(**cfg["ground_truth"])
        personas = [_persona_from_obj(p) for p in cfg["personas"]]
    except KeyError as err:
        raise ValueError(f"experiment config needs a {err.args[0]!r} section") from err
    except TypeError as err:
        raise ValueError(f"experiment config: {err}") from err
    if len(personas) != 2:
        raise ValueError(f"experiment config needs exactly 2 personas, got {len(personas)}")
    fusion_config = FusionConfig(**cfg.get("fusion", {}))
    eval_cfg = dict(cfg.get("evaluation", {"criterion": "center_distance"}))
    kind = eval_cfg.pop("criterion", "center_distance")
    if kind == "center_distance":
        criterion = CenterDistance(**eval_cfg)
    elif kind == "box_iou":
        criterion = BoxIoU(**eval_cfg)
    else:
        raise ValueError(f"unknown evaluation criterion {kind!r}")

    reports = run_experiment(
        gt_config,
        personas[0],
        personas[1],
        fusion_config=fusion_config,
        criterion=criterion,
        n_seeds=int(cfg.get("n_seeds", 100)),
        base_seed=int(cfg.get("base_seed", 0)),
        workers=args.threads,
    )

    names = [p.name for p in personas]
    mean = lambda vals: float(np.mean(vals))
    summary: dict = {"trials": len(reports)}
    for name in names:
        ms = [r.persona_metrics[name] for r in reports]
        summary[name] = {
            "precision": mean([m.precision for m in ms]),
            "recall": mean([m.recall for m in ms]),
            "f1": mean([m.f1 for m in ms]),
        }
    fused_ms = [r.fused_metrics for r in reports]
    summary["fused"] = {
        "precision": mean([m.precision for m in fused_ms]),
        "recall": mean([m.recall for m in fused_ms]),
        "f1": mean([m.f1 for m in fused_ms]),
    }
    summary["fused_wins"] = {
        "recall": sum(
            1
            for r in reports
            if r.fused_metrics.recall > max(m.recall for m in r.persona_metrics.values())
        ),
        "f1": sum(
            1
            for r in reports
            if r.fused_metrics.f1 > max(m.f1 for m in r.persona_metrics.values())
        ),
    }

    out = {"config": reports[0].config, "summary": summary, "trials": [r.to_dict() for r in reports]}
    with open(args.output, "w", encoding="utf-8") as fh:
        json.dump(out, fh, indent=2)
        fh.write("\n")

    print(f"{'detector':<16} {'precision':>9} {'recall':>7} {'f1':>7}")
    for name in (*names, "fused"):
        s = summary[name]
        print(f"{name:<16} {s['precision']:>9.4f} {s['recall']:>7.4f} {s['f1']:>7.4f}")
    wins = summary["fused_wins"]
    print(
        f"fused beats both: recall {wins['recall']}/{len(reports)} trials, "
        f"f1 {wins['f1']}/{len(reports)} trials -> {args.output}"
    )
    return 0


_COMMANDS = {
    "tile": _cmd_tile,
    "fuse": _cmd_fuse,
    "eval": _cmd_eval,
    "augment": _cmd_augment,
    "simulate": _cmd_simulate,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (OSError, ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
