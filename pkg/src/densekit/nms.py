"""Greedy non-maximum suppression with the four tunable inference knobs.

The pipeline is: stable sort by score descending, truncate to the
pre-NMS top-k, drop detections under the confidence floor, run the
greedy suppression pass, then cap the accepted list. Suppression uses
strict inequality: a detection is removed only when its IoU against an
accepted detection exceeds the threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import Box, boxes_to_array

__all__ = ["Detection", "NmsConfig", "nms"]


@dataclass(frozen=True)
class Detection:
    box: Box
    score: float

    def __post_init__(self):
        if not (math.isfinite(self.score) and 0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be in [0, 1], got {self.score}")


@dataclass(frozen=True)
class NmsConfig:
    """NMS hyper-parameters; defaults are the tuned dense-scene values."""

    pre_topk: int = 3000
    score_threshold: float = 0.05
    iou_threshold: float = 0.7
    max_out: int = 400

    def __post_init__(self):
        if self.pre_topk < 1:
            raise ValueError("pre_topk must be >= 1")
        if not 0.0 <= self.score_threshold <= 1.0:
            raise ValueError("score_threshold must be in [0, 1]")
        if not 0.0 <= self.iou_threshold <= 1.0:
            raise ValueError("iou_threshold must be in [0, 1]")
        if self.max_out < 1:
            raise ValueError("max_out must be >= 1")


def nms(dets: Sequence[Detection], cfg: NmsConfig = NmsConfig()) -> list[Detection]:
    """Greedy single-class NMS.

    Output detections are the input objects themselves (never modified),
    in score-descending order; ties on equal scores keep input order.
    """
    if not dets:
        return []
    scores = np.array([d.score for d in dets], dtype=np.float64)
    order = np.argsort(-scores, kind="stable")[:cfg.pre_topk]
    order = order[scores[order] >= cfg.score_threshold]
    if order.size == 0:
        return []

    boxes = boxes_to_array([dets[i].box for i in order])
    x1, y1, x2, y2 = boxes[:, 0], boxes[:, 1], boxes[:, 2], boxes[:, 3]
    areas = (x2 - x1) * (y2 - y1)

    keep: list[int] = []
    idx = np.arange(order.size)
    while idx.size > 0 and len(keep) < cfg.max_out:
        i = idx[0]
        keep.append(int(i))
        rest = idx[1:]
        xx1 = np.maximum(x1[i], x1[rest])
        yy1 = np.maximum(y1[i], y1[rest])
        xx2 = np.minimum(x2[i], x2[rest])
        yy2 = np.minimum(y2[i], y2[rest])
        inter = np.clip(xx2 - xx1, 0.0, None) * np.clip(yy2 - yy1, 0.0, None)
        union = areas[i] + areas[rest] - inter
        ovr = np.zeros_like(inter)
        np.divide(inter, union, out=ovr, where=union > 0)
        idx = rest[ovr <= cfg.iou_threshold]
    return [dets[int(order[i])] for i in keep]
