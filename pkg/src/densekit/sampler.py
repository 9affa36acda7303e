"""Anchor generation, max-IoU assignment, and positive-sample capping.

Reproduces the training-side analysis of how many positive anchors a
densely annotated image produces, which is what motivates raising the
region-proposal sampler capacity from its sparse-scene default. Anchor
and assigner defaults follow the common FPN five-level scheme; only the
sampler capacities are the tuned values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset, Histogram, regular_histogram
from .geometry import Box, ImageDims, boxes_to_array, pairwise_iou, rescale_factor
from .util import parallel_map

__all__ = [
    "POSITIVE",
    "NEGATIVE",
    "IGNORE",
    "AnchorConfig",
    "AssignConfig",
    "SamplerConfig",
    "AssignResult",
    "SampleResult",
    "generate_anchors",
    "assign",
    "positive_histogram",
    "cap_sample",
]

POSITIVE = 1
NEGATIVE = -1
IGNORE = 0


@dataclass(frozen=True)
class AnchorConfig:
    strides: tuple[int, ...] = (4, 8, 16, 32, 64)
    base_scale: float = 8.0
    ratios: tuple[float, ...] = (0.5, 1.0, 2.0)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.strides, self.strides[1:])):
            raise ValueError("strides must be ascending")
        if not self.strides or any(s <= 0 for s in self.strides):
            raise ValueError("strides must be positive")
        if self.base_scale <= 0:
            raise ValueError("base_scale must be positive")
        if not self.ratios or any(r <= 0 for r in self.ratios):
            raise ValueError("ratios must be positive")


@dataclass(frozen=True)
class AssignConfig:
    pos_iou: float = 0.7
    neg_iou: float = 0.3
    match_low_quality: bool = True

    def __post_init__(self):
        if not 0.0 <= self.neg_iou <= self.pos_iou <= 1.0:
            raise ValueError("need 0 <= neg_iou <= pos_iou <= 1")


@dataclass(frozen=True)
class SamplerConfig:
    num: int = 512
    pos_fraction: float = 0.5

    def __post_init__(self):
        if self.num < 1:
            raise ValueError("num must be >= 1")
        if not 0.0 < self.pos_fraction <= 1.0:
            raise ValueError("pos_fraction must be in (0, 1]")


@dataclass
class AssignResult:
    """Per-anchor labels (POSITIVE / NEGATIVE / IGNORE) and matched GT index.

    ``matched_gt`` is -1 for anchors that are not positive.
    """

    labels: np.ndarray
    matched_gt: np.ndarray

    @property
    def num_positive(self) -> int:
        return int(np.count_nonzero(self.labels == POSITIVE))


@dataclass
class SampleResult:
    pos_indices: np.ndarray
    neg_indices: np.ndarray

    @property
    def indices(self) -> np.ndarray:
        return np.concatenate([self.pos_indices, self.neg_indices])


def generate_anchors(dims: ImageDims, cfg: AnchorConfig = AnchorConfig()) -> np.ndarray:
    """All pyramid anchors for an image as an (N, 4) corner-form array.

    Per stride s the grid has ceil(W/s) x ceil(H/s) centers at
    ((i+0.5)s, (j+0.5)s); each center carries one anchor per aspect ratio
    with area (base_scale*s)^2 and w/h equal to the ratio. Anchors may
    extend beyond the image (no clipping). Order: strides outer, then
    grid rows, grid columns, ratios.
    """
    parts = []
    ratios = np.asarray(cfg.ratios, dtype=np.float64)
    for s in cfg.strides:
        nx = math.ceil(dims.width / s)
        ny = math.ceil(dims.height / s)
        cx = (np.arange(nx) + 0.5) * s
        cy = (np.arange(ny) + 0.5) * s
        side = cfg.base_scale * s
        ws = side * np.sqrt(ratios)
        hs = side / np.sqrt(ratios)
        # (ny, nx, R) broadcast, rows outer
        cxg, cyg = np.meshgrid(cx, cy)
        x1 = cxg[:, :, None] - ws / 2.0
        x2 = cxg[:, :, None] + ws / 2.0
        y1 = cyg[:, :, None] - hs / 2.0
        y2 = cyg[:, :, None] + hs / 2.0
        parts.append(np.stack([x1, y1, x2, y2], axis=-1).reshape(-1, 4))
    return np.concatenate(parts, axis=0)


def assign(anchors: np.ndarray, gts: Sequence[Box] | np.ndarray,
           cfg: AssignConfig = AssignConfig(),
           chunk_size: int = 65536) -> AssignResult:
    """Max-IoU assignment of anchors to ground-truth boxes.

    An anchor is positive when its best IoU reaches ``pos_iou``, negative
    below ``neg_iou``, otherwise ignored. With ``match_low_quality`` the
    anchors achieving each ground truth's own maximum IoU also become
    positive (guarded to ground truths with a strictly positive maximum,
    otherwise a stranded ground truth would claim every anchor). Ties on
    an anchor's best IoU resolve to the lowest ground-truth index; a
    low-quality anchor shared by several ground truths keeps the last one
    in index order, mirroring the usual sequential-override behavior.

    Anchors are processed in chunks so the IoU matrix never exceeds
    chunk_size x len(gts).
    """
    anchors = np.asarray(anchors, dtype=np.float64).reshape(-1, 4)
    n = len(anchors)
    gt_arr = (np.asarray(gts, dtype=np.float64).reshape(-1, 4)
              if isinstance(gts, np.ndarray) else boxes_to_array(gts))
    n_gt = len(gt_arr)
    labels = np.full(n, NEGATIVE, dtype=np.int8)
    matched = np.full(n, -1, dtype=np.int64)
    if n_gt == 0 or n == 0:
        return AssignResult(labels, matched)

    anchor_max = np.zeros(n)
    anchor_arg = np.zeros(n, dtype=np.int64)
    gt_max = np.zeros(n_gt)
    for lo in range(0, n, chunk_size):
        hi = min(lo + chunk_size, n)
        ious = pairwise_iou(anchors[lo:hi], gt_arr)
        anchor_max[lo:hi] = ious.max(axis=1)
        anchor_arg[lo:hi] = ious.argmax(axis=1)
        np.maximum(gt_max, ious.max(axis=0), out=gt_max)

    # negative strictly below neg_iou, positive at pos_iou and above,
    # the band in between is ignored
    labels[(anchor_max >= cfg.neg_iou) & (anchor_max < cfg.pos_iou)] = IGNORE
    labels[anchor_max >= cfg.pos_iou] = POSITIVE
    matched[labels == POSITIVE] = anchor_arg[labels == POSITIVE]

    if cfg.match_low_quality:
        eligible = gt_max > 0.0
        for lo in range(0, n, chunk_size):
            hi = min(lo + chunk_size, n)
            ious = pairwise_iou(anchors[lo:hi], gt_arr)
            for g in range(n_gt):
                if not eligible[g]:
                    continue
                best = np.flatnonzero(ious[:, g] == gt_max[g])
                if best.size:
                    labels[lo + best] = POSITIVE
                    matched[lo + best] = g
    return AssignResult(labels, matched)


def positive_histogram(d: Dataset, anchor_cfg: AnchorConfig = AnchorConfig(),
                       assign_cfg: AssignConfig = AssignConfig(),
                       long_side: float = 1333.0, short_side: float = 800.0,
                       bin_width: float = 32.0, threads: int = 1) -> Histogram:
    """Histogram of per-image positive-anchor counts at the training scale.

    Each image (and its boxes) is rescaled by the aspect-preserving
    factor for the target size before anchors are generated and assigned.
    Deterministic: no sampling is involved.
    """
    if not d.records:
        raise ValueError("positive_histogram requires a non-empty dataset")

    def count_one(rec) -> int:
        factor = rescale_factor(rec.dims, long_side, short_side)
        dims = ImageDims(rec.dims.width * factor, rec.dims.height * factor)
        anchors = generate_anchors(dims, anchor_cfg)
        gt_arr = boxes_to_array(rec.boxes) * factor
        return assign(anchors, gt_arr, assign_cfg).num_positive

    counts = parallel_map(count_one, d.records, threads=threads)
    return regular_histogram(counts, bin_width)


def cap_sample(labels: np.ndarray, cfg: SamplerConfig = SamplerConfig(),
               rng: np.random.Generator | None = None) -> SampleResult:
    """Sample positives up to num * pos_fraction, fill the rest with negatives.

    Both draws are uniform without replacement; whichever side has fewer
    candidates than its quota is kept whole. Index arrays come back
    sorted. Deterministic for a fixed generator state.
    """
    if rng is None:
        rng = np.random.default_rng()
    labels = np.asarray(labels)
    pos = np.flatnonzero(labels == POSITIVE)
    neg = np.flatnonzero(labels == NEGATIVE)
    pos_quota = int(cfg.num * cfg.pos_fraction)
    if len(pos) > pos_quota:
        pos = np.sort(rng.choice(pos, size=pos_quota, replace=False))
    neg_quota = cfg.num - len(pos)
    if len(neg) > neg_quota:
        neg = np.sort(rng.choice(neg, size=neg_quota, replace=False))
    return SampleResult(pos, neg)
