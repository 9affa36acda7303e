"""Command-line front end: one executable, file-based subcommands.

Every run writes its outputs plus a ``manifest.json`` (flags, seed, input
digests, tool version, duration) into ``--out-dir``. Outputs are
byte-stable for a fixed seed. Exit codes: 0 success, 1 usage error,
2 data error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from typing import Sequence

import numpy as np

from . import __version__
from .augment import DEFAULT_KEEP_IOU, SEVEN, UNIFORM, apply_crop, sample_crop
from .coverage import simulate_coverage
from .dataset import (
    AnnotationError,
    Dataset,
    ImageRecord,
    count_stats,
    load_annotations,
    scale_histogram,
    small_object_fraction,
)
from .doe import FactorSpec, anor, build_l9, run_experiment, run_values
from .evalmap import EvalConfig, evaluate
from .geometry import ImageDims
from .io import (
    dataset_to_coco,
    load_detections,
    write_detections,
    write_histogram_csv,
    write_json,
)
from .nms import NmsConfig, nms
from .sampler import AnchorConfig, AssignConfig, positive_histogram
from .util import default_threads, sha256_digest

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

NMS_FACTOR_NAMES = ("pre_topk", "score_thr", "iou_thr", "max_out")


def _parse_size(text: str) -> tuple[float, float]:
    """Parse 'LONGxSHORT', e.g. '1333x800'."""
    try:
        long_s, short_s = text.lower().split("x")
        return float(long_s), float(short_s)
    except ValueError as e:
        raise argparse.ArgumentTypeError(
            f"expected LONGxSHORT (e.g. 1333x800), got {text!r}") from e


def _parse_factor(text: str) -> tuple[str, tuple[float, float, float]]:
    try:
        name, values = text.split("=", 1)
        levels = tuple(float(v) for v in values.split(","))
    except ValueError as e:
        raise argparse.ArgumentTypeError(
            f"expected name=v1,v2,v3, got {text!r}") from e
    if len(levels) != 3:
        raise argparse.ArgumentTypeError(
            f"factor {name!r} must have exactly 3 levels")
    return name.strip(), levels


def _parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="densekit",
        description="Toolkit for densely packed object-detection datasets.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    def add_common(p):
        p.add_argument("--out-dir", default=".",
                       help="directory for outputs and manifest.json")
        p.add_argument("--threads", type=int, default=None,
                       help=f"worker threads (default: DENSEKIT_THREADS or cores)")

    p = sub.add_parser("stats", help="dataset statistics and scale histogram")
    p.add_argument("--gt", required=True, help="COCO-style annotation file")
    p.add_argument("--target", type=_parse_size, default=(1333.0, 800.0),
                   help="rescale target as LONGxSHORT (default 1333x800)")
    p.add_argument("--bin-width", type=float, default=8.0)
    p.add_argument("--small-threshold", type=float, default=32.0)
    add_common(p)

    p = sub.add_parser("crop", help="crop every image once and clip its boxes")
    p.add_argument("--gt", required=True)
    p.add_argument("--strategy", choices=[UNIFORM, SEVEN], default=UNIFORM)
    p.add_argument("--crop-w", type=float, required=True)
    p.add_argument("--crop-h", type=float, required=True)
    p.add_argument("--keep-iou", type=float, default=DEFAULT_KEEP_IOU,
                   help="retention threshold on iou(clipped, original)")
    p.add_argument("--seed", type=int, default=0)
    add_common(p)

    p = sub.add_parser("coverage", help="Monte-Carlo crop-coverage simulation")
    p.add_argument("--strategy", choices=[UNIFORM, SEVEN], default=UNIFORM)
    p.add_argument("--img-w", type=float, required=True)
    p.add_argument("--img-h", type=float, required=True)
    p.add_argument("--crop-w", type=float, required=True)
    p.add_argument("--crop-h", type=float, required=True)
    p.add_argument("--epochs", type=int, default=12)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bins", type=int, default=50)
    add_common(p)

    p = sub.add_parser("nms", help="greedy NMS over a detection results file")
    p.add_argument("--dets", required=True, help="COCO-style results JSON")
    p.add_argument("--pre-topk", type=int, default=3000)
    p.add_argument("--score-thr", type=float, default=0.05)
    p.add_argument("--iou-thr", type=float, default=0.7)
    p.add_argument("--max-out", type=int, default=400)
    add_common(p)

    p = sub.add_parser("tune", help="L9 orthogonal search over NMS parameters")
    p.add_argument("--gt", required=True)
    p.add_argument("--dets", required=True, help="raw detections to re-filter")
    p.add_argument("--factor", type=_parse_factor, action="append", required=True,
                   metavar="NAME=V1,V2,V3",
                   help=f"one per factor, names {', '.join(NMS_FACTOR_NAMES)}")
    p.add_argument("--eval-max-det", type=int, default=400)
    p.add_argument("--minimize", action="store_true")
    add_common(p)

    p = sub.add_parser("eval", help="COCO-style mmAP evaluation")
    p.add_argument("--gt", required=True)
    p.add_argument("--dets", required=True)
    p.add_argument("--max-det", type=int, default=400)
    add_common(p)

    p = sub.add_parser("sampler", help="per-image positive-anchor histogram")
    p.add_argument("--gt", required=True)
    p.add_argument("--input-size", type=_parse_size, default=(1333.0, 800.0))
    p.add_argument("--pos-iou", type=float, default=0.7)
    p.add_argument("--neg-iou", type=float, default=0.3)
    p.add_argument("--no-match-low-quality", action="store_true")
    p.add_argument("--strides", type=_parse_int_list, default=(4, 8, 16, 32, 64))
    p.add_argument("--base-scale", type=float, default=8.0)
    p.add_argument("--ratios", type=_parse_float_list, default=(0.5, 1.0, 2.0))
    p.add_argument("--bin-width", type=float, default=32.0)
    add_common(p)

    return parser


def _load_gt(path: str) -> Dataset:
    dataset, _ = load_annotations(path)
    return dataset


def _cmd_stats(args, out_dir: str) -> list[str]:
    dataset, report = load_annotations(args.gt)
    long_side, short_side = args.target
    stats = count_stats(dataset)
    hist = scale_histogram(dataset, long_side, short_side, args.bin_width)
    fraction = small_object_fraction(dataset, long_side, short_side,
                                     args.small_threshold)
    write_json(os.path.join(out_dir, "stats.json"), {
        "split": dataset.split_name,
        "images": len(dataset),
        "annotations": dataset.total_annotations,
        "dropped_annotations": report.dropped,
        "count_stats": {
            "mean": stats.mean,
            "mean_rounded": stats.mean_rounded,
            "max": stats.max,
            "min": stats.min,
            "p995": stats.p995,
            "p005": stats.p005,
        },
        "small_object_threshold": args.small_threshold,
        "small_object_fraction": fraction,
        "rescale_target": [long_side, short_side],
    })
    write_histogram_csv(os.path.join(out_dir, "scale_hist.csv"), hist)
    with open(os.path.join(out_dir, "count_stats.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mean", "mean_rounded", "max", "min", "p995", "p005"])
        writer.writerow([repr(stats.mean), stats.mean_rounded, stats.max,
                         stats.min, stats.p995, stats.p005])
    return [args.gt]


def _cmd_crop(args, out_dir: str) -> list[str]:
    dataset, _ = load_annotations(args.gt)
    records = []
    for index, rec in enumerate(dataset.records):
        rng = np.random.default_rng([args.seed, index])
        window = sample_crop(args.strategy, rec.dims, args.crop_w, args.crop_h, rng)
        result = apply_crop(window, rec.boxes, args.keep_iou)
        dims = ImageDims(window.window.width, window.window.height)
        records.append(ImageRecord(rec.image_id, dims, result.kept_boxes,
                                   rec.file_name))
    cropped = Dataset(dataset.split_name + "_crop", tuple(records))
    write_json(os.path.join(out_dir, "cropped.json"), dataset_to_coco(cropped))
    return [args.gt]


def _cmd_coverage(args, out_dir: str, threads: int) -> list[str]:
    dist = simulate_coverage(
        args.strategy, ImageDims(args.img_w, args.img_h),
        args.crop_w, args.crop_h, args.epochs, args.trials,
        seed=args.seed, threads=threads, bins=args.bins)
    with open(os.path.join(out_dir, "coverage.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "coverage"])
        for i, v in enumerate(dist.samples):
            writer.writerow([i, repr(v)])
    write_json(os.path.join(out_dir, "coverage.json"), {
        "strategy": args.strategy,
        "epochs": args.epochs,
        "trials": args.trials,
        "mean": dist.mean,
        "stddev": dist.stddev,
        "histogram": {
            "bin_edges": list(dist.histogram.bin_edges),
            "counts": list(dist.histogram.counts),
            "cumulative_ratio": list(dist.histogram.cumulative_ratio),
        },
    })
    return []


def _cmd_nms(args, out_dir: str) -> list[str]:
    dets_by_image = load_detections(args.dets)
    cfg = NmsConfig(args.pre_topk, args.score_thr, args.iou_thr, args.max_out)
    filtered = {image_id: nms(dets, cfg)
                for image_id, dets in dets_by_image.items()}
    write_detections(os.path.join(out_dir, "nms.json"), filtered)
    return [args.dets]


def _cmd_eval(args, out_dir: str, threads: int) -> list[str]:
    dataset = _load_gt(args.gt)
    dets = load_detections(args.dets)
    result = evaluate(dataset, dets, EvalConfig(max_det=args.max_det),
                      threads=threads)
    write_json(os.path.join(out_dir, "eval.json"), {
        "mmAP": result.mmap,
        "AP_per_threshold": list(result.ap_per_threshold),
        "AP_by_area": result.ap_by_area,
        "AR": result.ar,
        "max_det": args.max_det,
    })
    return [args.gt, args.dets]


def _cmd_tune(args, out_dir: str, threads: int) -> list[str]:
    factors_in = dict(args.factor)
    if set(factors_in) != set(NMS_FACTOR_NAMES):
        raise ValueError(
            f"tune needs exactly the factors {', '.join(NMS_FACTOR_NAMES)}; "
            f"got {', '.join(sorted(factors_in))}")
    factors = [FactorSpec(name, factors_in[name]) for name in NMS_FACTOR_NAMES]
    dataset = _load_gt(args.gt)
    dets_by_image = load_detections(args.dets)
    eval_cfg = EvalConfig(max_det=args.eval_max_det)

    def respond(pre_topk, score_thr, iou_thr, max_out) -> float:
        cfg = NmsConfig(int(round(pre_topk)), score_thr, iou_thr,
                        int(round(max_out)))
        filtered = {image_id: nms(dets, cfg)
                    for image_id, dets in dets_by_image.items()}
        return evaluate(dataset, filtered, eval_cfg, threads=threads).mmap

    array = build_l9()
    scores = run_experiment(array, factors, respond)
    report = anor(array, scores, factors, minimize=args.minimize)
    write_json(os.path.join(out_dir, "tune.json"), {
        "runs": [
            {
                "run": run,
                "levels": [int(v) for v in array[run]],
                "values": dict(zip(NMS_FACTOR_NAMES,
                                   run_values(array, factors, run))),
                "score": scores[run],
            }
            for run in range(len(array))
        ],
        "anor": {
            "factors": [
                {
                    "name": fa.name,
                    "level_means": list(fa.level_means),
                    "range": fa.range,
                    "best_level": fa.best_level,
                    "best_value": fa.best_value,
                }
                for fa in report.factors
            ],
            "ranking": list(report.ranking),
            "recommendation": report.recommendation,
        },
    })
    return [args.gt, args.dets]


def _cmd_sampler(args, out_dir: str, threads: int) -> list[str]:
    dataset = _load_gt(args.gt)
    anchor_cfg = AnchorConfig(args.strides, args.base_scale, args.ratios)
    assign_cfg = AssignConfig(args.pos_iou, args.neg_iou,
                              not args.no_match_low_quality)
    long_side, short_side = args.input_size
    hist = positive_histogram(dataset, anchor_cfg, assign_cfg,
                              long_side, short_side, args.bin_width,
                              threads=threads)
    write_histogram_csv(os.path.join(out_dir, "positive_hist.csv"), hist)
    return [args.gt]


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    out_dir = args.out_dir
    threads = args.threads if args.threads is not None else default_threads()
    started = time.monotonic()
    try:
        os.makedirs(out_dir, exist_ok=True)
        if args.cmd == "stats":
            inputs = _cmd_stats(args, out_dir)
        elif args.cmd == "crop":
            inputs = _cmd_crop(args, out_dir)
        elif args.cmd == "coverage":
            inputs = _cmd_coverage(args, out_dir, threads)
        elif args.cmd == "nms":
            inputs = _cmd_nms(args, out_dir)
        elif args.cmd == "eval":
            inputs = _cmd_eval(args, out_dir, threads)
        elif args.cmd == "tune":
            inputs = _cmd_tune(args, out_dir, threads)
        elif args.cmd == "sampler":
            inputs = _cmd_sampler(args, out_dir, threads)
        else:  # unreachable with required=True
            return EXIT_USAGE
        digests = {path: sha256_digest(path) for path in inputs}
    except (AnnotationError, ValueError, KeyError, OSError) as e:
        print(f"densekit {args.cmd}: error: {e}", file=sys.stderr)
        return EXIT_DATA

    flags = {k: v for k, v in vars(args).items()
             if k not in ("cmd",) and v is not None}
    write_json(os.path.join(out_dir, "manifest.json"), {
        "tool": "densekit",
        "version": __version__,
        "subcommand": args.cmd,
        "flags": {k: list(v) if isinstance(v, tuple) else v
                  for k, v in flags.items()},
        "seed": getattr(args, "seed", None),
        "input_digests": digests,
        "duration_s": round(time.monotonic() - started, 6),
    })
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
