"""Crop-window generation and ground-truth clipping.

Two strategies: a regular uniform random crop, and a seven-position crop
that only samples the four image corners, the center, and the two
endpoints of the image's short axis. Clipped boxes survive only when
their IoU against the original box is strictly above a threshold, which
discards "fake boxes" whose content was cropped away.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import Box, ImageDims, intersect, iou

__all__ = [
    "UNIFORM",
    "SEVEN",
    "ANCHOR_LABELS",
    "DEFAULT_KEEP_IOU",
    "CropWindow",
    "CropResult",
    "seven_crop_anchors",
    "sample_crop",
    "apply_crop",
]

UNIFORM = "uniform"
SEVEN = "seven"

# Deterministic order of the seven fixed anchors. SHORT_A / SHORT_B are the
# two endpoints of the short axis: top/bottom center for landscape images,
# left/right center for portrait ones.
ANCHOR_LABELS = ("TL", "TR", "BL", "BR", "CENTER", "SHORT_A", "SHORT_B")

# The retention rule's threshold is deliberately configurable; 0.3 keeps
# majority-visible objects while dropping mostly-background clips.
DEFAULT_KEEP_IOU = 0.3


@dataclass(frozen=True)
class CropWindow:
    window: Box
    anchor_label: str


@dataclass(frozen=True)
class CropResult:
    """Boxes surviving a crop, translated to window-local coordinates."""

    window: CropWindow
    kept_boxes: tuple[Box, ...]
    dropped_count: int


def _clamp_crop(dims: ImageDims, crop_w: float, crop_h: float) -> tuple[float, float]:
    if crop_w <= 0 or crop_h <= 0:
        raise ValueError("crop dims must be positive")
    return min(crop_w, dims.width), min(crop_h, dims.height)


def seven_crop_anchors(dims: ImageDims, crop_w: float, crop_h: float) -> list[CropWindow]:
    """The seven fixed crop windows for an image, possibly coincident.

    Windows are flush against the named image extreme and centered along
    the other axis; crop dims larger than the image are clamped first.
    Always returns exactly 7 windows, all within image bounds.
    """
    cw, ch = _clamp_crop(dims, crop_w, crop_h)
    max_x = dims.width - cw
    max_y = dims.height - ch
    cx = max_x / 2.0
    cy = max_y / 2.0
    corners = [(0.0, 0.0), (max_x, 0.0), (0.0, max_y), (max_x, max_y)]
    if dims.width >= dims.height:
        short_ends = [(cx, 0.0), (cx, max_y)]
    else:
        short_ends = [(0.0, cy), (max_x, cy)]
    origins = corners + [(cx, cy)] + short_ends
    return [
        CropWindow(Box(x0, y0, x0 + cw, y0 + ch), label)
        for (x0, y0), label in zip(origins, ANCHOR_LABELS)
    ]


def sample_crop(strategy: str, dims: ImageDims, crop_w: float, crop_h: float,
                rng: np.random.Generator) -> CropWindow:
    """Draw one crop window.

    ``uniform`` draws the top-left corner from a continuous uniform
    distribution over all in-bounds positions; ``seven`` picks one of the
    seven fixed anchors with equal probability.
    """
    if strategy == UNIFORM:
        cw, ch = _clamp_crop(dims, crop_w, crop_h)
        x0 = rng.uniform(0.0, dims.width - cw) if dims.width > cw else 0.0
        y0 = rng.uniform(0.0, dims.height - ch) if dims.height > ch else 0.0
        return CropWindow(Box(x0, y0, x0 + cw, y0 + ch), "UNIFORM")
    if strategy == SEVEN:
        anchors = seven_crop_anchors(dims, crop_w, crop_h)
        return anchors[int(rng.integers(len(anchors)))]
    raise ValueError(f"unknown crop strategy {strategy!r}")


def apply_crop(window: CropWindow, boxes: Sequence[Box],
               keep_iou_threshold: float = DEFAULT_KEEP_IOU) -> CropResult:
    """Clip boxes to a crop window with the IoU retention rule.

    A clipped box is kept iff iou(clipped, original) is strictly greater
    than the threshold ("higher than"); boxes exactly at the threshold
    are dropped. Kept boxes are translated into window-local coordinates.
    """
    if not 0.0 <= keep_iou_threshold <= 1.0:
        raise ValueError("keep_iou_threshold must be in [0, 1]")
    win = window.window
    kept = []
    for box in boxes:
        clipped = intersect(box, win)
        if clipped is None:
            continue
        if iou(clipped, box) > keep_iou_threshold:
            kept.append(clipped.translate(-win.x1, -win.y1))
    return CropResult(window, tuple(kept), len(boxes) - len(kept))
