"""COCO-style mean average precision with a configurable per-image maxDet.

Single-category protocol: per image and IoU threshold, detections are
greedily matched in score order to the unmatched ground truth with the
highest IoU at or above the threshold; TP/FP records accumulate globally
and each threshold's AP is the 101-point interpolated area under the
precision-recall curve. mmAP averages AP over the thresholds. Raising
maxDet beyond the number a dense image needs can only add matches, which
is exactly why dense scenes are scored with maxDet 400 instead of 100.

Deterministic tie rules (needed for oracle comparison): detections with
equal scores keep input order, and a detection matching several ground
truths at equal IoU takes the lowest ground-truth index, preferring
area-qualified ground truths over ignored ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .dataset import Dataset
from .geometry import boxes_to_array, pairwise_iou
from .nms import Detection
from .util import parallel_map

__all__ = [
    "DEFAULT_IOU_THRESHOLDS",
    "DEFAULT_AREA_RANGES",
    "RECALL_POINTS",
    "EvalConfig",
    "EvalResult",
    "evaluate",
    "average_precision",
]

# round() keeps every threshold on the exact grid value (np.linspace drifts
# off 0.9 by one ulp), so an IoU of exactly 0.60 matches at the 0.60 bar.
DEFAULT_IOU_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))

# (name, min area, max area), bounds inclusive, COCO convention.
DEFAULT_AREA_RANGES = (
    ("all", 0.0, 1e10),
    ("small", 0.0, 32.0 ** 2),
    ("medium", 32.0 ** 2, 96.0 ** 2),
    ("large", 96.0 ** 2, 1e10),
)

RECALL_POINTS = np.arange(101) / 100.0


@dataclass(frozen=True)
class EvalConfig:
    iou_thresholds: tuple[float, ...] = DEFAULT_IOU_THRESHOLDS
    max_det: int = 400
    area_ranges: tuple[tuple[str, float, float], ...] = DEFAULT_AREA_RANGES

    def __post_init__(self):
        t = self.iou_thresholds
        if not t or any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError("iou_thresholds must be strictly increasing")
        if t[0] <= 0.0 or t[-1] > 1.0:
            raise ValueError("iou_thresholds must lie in (0, 1]")
        if self.max_det < 1:
            raise ValueError("max_det must be >= 1")
        if not self.area_ranges or self.area_ranges[0][0] != "all":
            raise ValueError("area_ranges must start with the 'all' range")


@dataclass
class EvalResult:
    mmap: float
    ap_per_threshold: tuple[float, ...]
    ap_by_area: dict[str, float]
    ar: float  # average recall at max_det, area range "all"


def average_precision(tp_flags: Sequence[bool], gt_count: int) -> float:
    """101-point interpolated AP over a score-sorted TP/FP record list.

    Returns NaN when gt_count is 0 (undefined; excluded from any mean).
    """
    if gt_count < 0:
        raise ValueError("gt_count must be non-negative")
    if gt_count == 0:
        return float("nan")
    flags = np.asarray(tp_flags, dtype=bool)
    tp_cum = np.cumsum(flags)
    fp_cum = np.cumsum(~flags)
    return _ap_from_cumulants(tp_cum, fp_cum, gt_count)


def _ap_from_cumulants(tp_cum: np.ndarray, fp_cum: np.ndarray,
                       gt_count: int) -> float:
    if len(tp_cum) == 0:
        return 0.0
    recall = tp_cum / gt_count
    denom = tp_cum + fp_cum
    precision = np.zeros(len(tp_cum))
    np.divide(tp_cum, denom, out=precision, where=denom > 0)
    # precision envelope: running maximum from the right
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    inds = np.searchsorted(recall, RECALL_POINTS, side="left")
    sampled = np.zeros(len(RECALL_POINTS))
    valid = inds < len(envelope)
    sampled[valid] = envelope[inds[valid]]
    return float(sampled.mean())


def _match_image(ious: np.ndarray, gt_ignore: np.ndarray,
                 thresholds: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Greedy per-threshold matching of score-ordered detections.

    Returns (matched, dt_ignore_from_gt), both of shape (T, D): the
    matched ground-truth index (-1 for none) and whether the match landed
    on an ignored ground truth.
    """
    n_det, n_gt = ious.shape
    n_thr = len(thresholds)
    matched = np.full((n_thr, n_det), -1, dtype=np.int64)
    ignored = np.zeros((n_thr, n_det), dtype=bool)
    if n_gt == 0 or n_det == 0:
        return matched, ignored
    # qualified ground truths first, original order within each group
    gt_order = np.argsort(gt_ignore, kind="stable")
    for ti, thr in enumerate(thresholds):
        gt_taken = np.zeros(n_gt, dtype=bool)
        for d in range(n_det):
            best_g = -1
            best_iou = 0.0
            for g in gt_order:
                if gt_taken[g]:
                    continue
                if best_g >= 0 and not gt_ignore[best_g] and gt_ignore[g]:
                    break  # a qualified match beats any ignored one
                v = ious[d, g]
                if v < thr:
                    continue
                if best_g < 0 or v > best_iou:
                    best_g = g
                    best_iou = v
            if best_g >= 0:
                gt_taken[best_g] = True
                matched[ti, d] = best_g
                ignored[ti, d] = bool(gt_ignore[best_g])
    return matched, ignored


def _prep_image(rec, detections, max_det: int):
    dts = list(detections.get(rec.image_id, ()))
    scores = np.array([d.score for d in dts], dtype=np.float64)
    order = np.argsort(-scores, kind="stable")[:max_det]
    det_boxes = boxes_to_array([dts[i].box for i in order])
    gt_boxes = boxes_to_array(rec.boxes)
    ious = pairwise_iou(det_boxes, gt_boxes)
    gt_areas = (gt_boxes[:, 2] - gt_boxes[:, 0]) * (gt_boxes[:, 3] - gt_boxes[:, 1])
    dt_areas = (det_boxes[:, 2] - det_boxes[:, 0]) * (det_boxes[:, 3] - det_boxes[:, 1])
    return scores[order], ious, gt_areas, dt_areas


def _match_range(prep, lo: float, hi: float, thresholds):
    scores, ious, gt_areas, dt_areas = prep
    gt_ig = (gt_areas < lo) | (gt_areas > hi)
    matched, ig_from_gt = _match_image(ious, gt_ig, thresholds)
    dt_out = (dt_areas < lo) | (dt_areas > hi)
    dt_ig = ig_from_gt | ((matched < 0) & dt_out[None, :])
    return scores, matched >= 0, dt_ig, int(np.count_nonzero(~gt_ig))


def evaluate(gt: Dataset, detections: Mapping[int, Sequence[Detection]],
             cfg: EvalConfig = EvalConfig(), threads: int = 1) -> EvalResult:
    """Evaluate per-image detections against a ground-truth dataset.

    ``detections`` maps image ids to detection lists; every id must exist
    in the dataset. Images without an entry count as zero detections.
    Per-image work may be spread over ``threads`` workers; the result does
    not depend on the worker count.
    """
    gt_ids = {rec.image_id for rec in gt.records}
    for image_id in detections:
        if image_id not in gt_ids:
            raise ValueError(f"detection references unknown image id {image_id}")

    thresholds = cfg.iou_thresholds
    n_thr = len(thresholds)

    prepped = parallel_map(
        lambda rec: _prep_image(rec, detections, cfg.max_det),
        gt.records, threads=threads)

    ap_by_area: dict[str, float] = {}
    ap_all: tuple[float, ...] = ()
    ar_all = float("nan")
    for name, lo, hi in cfg.area_ranges:
        per_image = parallel_map(
            lambda prep: _match_range(prep, lo, hi, thresholds),
            prepped, threads=threads)
        score_parts = [p[0] for p in per_image]
        tp_parts = [p[1] for p in per_image]
        ig_parts = [p[2] for p in per_image]
        npig = sum(p[3] for p in per_image)

        all_scores = np.concatenate(score_parts) if score_parts else np.zeros(0)
        glob = np.argsort(-all_scores, kind="stable")
        tp_mat = (np.concatenate(tp_parts, axis=1) if tp_parts
                  else np.zeros((n_thr, 0), dtype=bool))[:, glob]
        ig_mat = (np.concatenate(ig_parts, axis=1) if ig_parts
                  else np.zeros((n_thr, 0), dtype=bool))[:, glob]

        aps = []
        recalls = []
        for ti in range(n_thr):
            use = ~ig_mat[ti]
            flags = tp_mat[ti][use]
            if npig == 0:
                aps.append(float("nan"))
                recalls.append(float("nan"))
                continue
            tp_cum = np.cumsum(flags)
            fp_cum = np.cumsum(~flags)
            aps.append(_ap_from_cumulants(tp_cum, fp_cum, npig))
            recalls.append(float(tp_cum[-1] / npig) if len(tp_cum) else 0.0)

        valid = [a for a in aps if not math.isnan(a)]
        ap_by_area[name] = sum(valid) / len(valid) if valid else float("nan")
        if name == "all":
            ap_all = tuple(aps)
            valid_r = [r for r in recalls if not math.isnan(r)]
            ar_all = sum(valid_r) / len(valid_r) if valid_r else float("nan")

    return EvalResult(
        mmap=ap_by_area["all"],
        ap_per_threshold=ap_all,
        ap_by_area=ap_by_area,
        ar=ar_all,
    )
