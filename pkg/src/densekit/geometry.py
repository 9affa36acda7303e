"""Axis-aligned box arithmetic in continuous corner-form coordinates.

Boxes are (x1, y1, x2, y2) with (x1, y1) the top-left corner; zero-area
boxes are legal. All operations here are pure functions on immutable
values and are safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

__all__ = [
    "Box",
    "ImageDims",
    "iou",
    "intersect",
    "box_scale",
    "rescale_factor",
    "boxes_to_array",
    "pairwise_iou",
]


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle in pixel coordinates, corner form."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        for v in (self.x1, self.y1, self.x2, self.y2):
            if not math.isfinite(v):
                raise ValueError(f"box coordinates must be finite, got {self}")
        if self.x2 < self.x1 or self.y2 < self.y1:
            raise ValueError(f"box corners out of order: {self}")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    @classmethod
    def from_xywh(cls, x: float, y: float, w: float, h: float) -> "Box":
        return cls(x, y, x + w, y + h)

    def to_xywh(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.width, self.height)

    def translate(self, dx: float, dy: float) -> "Box":
        return Box(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)

    def scale(self, factor: float) -> "Box":
        return Box(self.x1 * factor, self.y1 * factor,
                   self.x2 * factor, self.y2 * factor)


@dataclass(frozen=True)
class ImageDims:
    """Width and height of an image in pixels."""

    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"image dims must be positive, got {self}")

    @property
    def area(self) -> float:
        return self.width * self.height


def intersect(a: Box, b: Box) -> Optional[Box]:
    """Overlap rectangle of two boxes, or None when they do not overlap.

    Boxes that merely touch along an edge yield a zero-area box, not None.
    """
    x1 = max(a.x1, b.x1)
    y1 = max(a.y1, b.y1)
    x2 = min(a.x2, b.x2)
    y2 = min(a.y2, b.y2)
    if x2 < x1 or y2 < y1:
        return None
    return Box(x1, y1, x2, y2)


def iou(a: Box, b: Box) -> float:
    """Intersection-over-union of two boxes.

    Defined as 0 whenever the union has zero area (two zero-area boxes),
    so the function is total on valid boxes.
    """
    inter = intersect(a, b)
    inter_area = inter.area if inter is not None else 0.0
    union = a.area + b.area - inter_area
    if union <= 0.0:
        return 0.0
    return inter_area / union


def box_scale(b: Box) -> float:
    """Scale of a box as sqrt(width * height)."""
    return math.sqrt(b.area)


def rescale_factor(dims: ImageDims, long_side: float, short_side: float) -> float:
    """Aspect-preserving rescale factor for a (long, short) size cap.

    The factor is min(short_side / min(W, H), long_side / max(W, H)), i.e.
    the largest scaling at which the image fits inside a long_side x
    short_side canvas in either orientation. Invariant under swapping the
    image's width and height.
    """
    if long_side <= 0 or short_side <= 0:
        raise ValueError("target sides must be positive")
    lo = min(dims.width, dims.height)
    hi = max(dims.width, dims.height)
    return min(short_side / lo, long_side / hi)


def boxes_to_array(boxes: Iterable[Box]) -> np.ndarray:
    """Pack boxes into an (N, 4) float64 array of x1, y1, x2, y2."""
    arr = np.array([(b.x1, b.y1, b.x2, b.y2) for b in boxes], dtype=np.float64)
    return arr.reshape(-1, 4)


def pairwise_iou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """IoU matrix between two (N, 4) / (M, 4) corner-form box arrays.

    Zero-union pairs get IoU 0, matching :func:`iou`.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    x1 = np.maximum(a[:, None, 0], b[None, :, 0])
    y1 = np.maximum(a[:, None, 1], b[None, :, 1])
    x2 = np.minimum(a[:, None, 2], b[None, :, 2])
    y2 = np.minimum(a[:, None, 3], b[None, :, 3])
    inter = np.clip(x2 - x1, 0.0, None) * np.clip(y2 - y1, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0)
    return out
