"""COCO-style annotation ingestion and dataset statistics.

Boxes are clamped to image bounds at ingestion; annotations that are
non-positive to begin with, reference a missing image, or end up with
zero area after clamping are dropped and counted in the ingest report.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import Box, ImageDims, box_scale, rescale_factor

__all__ = [
    "AnnotationError",
    "ImageRecord",
    "Dataset",
    "IngestReport",
    "CountStats",
    "Histogram",
    "load_annotations",
    "count_stats",
    "regular_histogram",
    "scale_histogram",
    "small_object_fraction",
]


class AnnotationError(ValueError):
    """Raised for malformed or inconsistent annotation documents."""


@dataclass(frozen=True)
class ImageRecord:
    image_id: int
    dims: ImageDims
    boxes: tuple[Box, ...]
    file_name: str = ""


@dataclass(frozen=True)
class Dataset:
    split_name: str
    records: tuple[ImageRecord, ...]

    def __len__(self) -> int:
        return len(self.records)

    @property
    def total_annotations(self) -> int:
        return sum(len(r.boxes) for r in self.records)

    def per_image_counts(self) -> list[int]:
        return [len(r.boxes) for r in self.records]


@dataclass(frozen=True)
class IngestReport:
    """Counts of annotations kept and dropped during ingestion."""

    kept: int
    dropped_nonpositive: int
    dropped_missing_image: int
    dropped_after_clamp: int

    @property
    def dropped(self) -> int:
        return (self.dropped_nonpositive + self.dropped_missing_image
                + self.dropped_after_clamp)


@dataclass(frozen=True)
class CountStats:
    """Per-image annotation-count statistics.

    ``mean`` is exact; ``mean_rounded`` is the integer form used in
    summary tables. Percentiles use the nearest-rank method (the
    ceil(q*n)-th order statistic of the sorted counts).
    """

    mean: float
    mean_rounded: int
    max: int
    min: int
    p995: int
    p005: int


@dataclass(frozen=True)
class Histogram:
    """Binned counts plus a cumulative-ratio curve.

    ``bin_edges`` has one more element than ``counts``; a value v falls in
    bin i when edges[i] <= v < edges[i+1], except the last bin which also
    includes its right edge.
    """

    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]
    cumulative_ratio: tuple[float, ...]

    def __post_init__(self):
        if len(self.counts) != len(self.bin_edges) - 1:
            raise ValueError("counts must have len(bin_edges) - 1 entries")
        if any(e2 <= e1 for e1, e2 in zip(self.bin_edges, self.bin_edges[1:])):
            raise ValueError("bin_edges must be strictly ascending")
        if any(c < 0 for c in self.counts):
            raise ValueError("counts must be non-negative")

    @property
    def total(self) -> int:
        return int(sum(self.counts))

    @classmethod
    def from_values(cls, values: Sequence[float], bin_edges: Sequence[float]) -> "Histogram":
        """Bin values into the given edges; edges must cover all values."""
        values = np.asarray(values, dtype=np.float64)
        edges = np.asarray(bin_edges, dtype=np.float64)
        if values.size and (values.min() < edges[0] or values.max() > edges[-1]):
            raise ValueError("bin_edges do not cover the value range")
        counts, _ = np.histogram(values, bins=edges)
        total = int(counts.sum())
        if total > 0:
            cum = np.cumsum(counts) / total
        else:
            cum = np.zeros(len(counts))
        return cls(tuple(float(e) for e in edges),
                   tuple(int(c) for c in counts),
                   tuple(float(c) for c in cum))

    def csv_rows(self) -> list[tuple[float, int, float]]:
        """Rows of (left bin edge, count, cumulative ratio) for export."""
        return [(self.bin_edges[i], self.counts[i], self.cumulative_ratio[i])
                for i in range(len(self.counts))]


def _clamp_box(x: float, y: float, w: float, h: float,
               dims: ImageDims) -> Box | None:
    """Clamp an xywh annotation to image bounds; None if degenerate."""
    x1 = min(max(x, 0.0), dims.width)
    y1 = min(max(y, 0.0), dims.height)
    x2 = min(max(x + w, 0.0), dims.width)
    y2 = min(max(y + h, 0.0), dims.height)
    if x2 <= x1 or y2 <= y1:
        return None
    return Box(x1, y1, x2, y2)


def load_annotations(path: str | os.PathLike,
                     split_name: str | None = None) -> tuple[Dataset, IngestReport]:
    """Load a COCO-style annotation document.

    The document must carry ``images`` (id, width, height) and
    ``annotations`` (image_id, bbox as [x, y, w, h]) arrays. Returns the
    dataset plus a report of dropped annotations.

    Raises:
        AnnotationError: on a malformed document or duplicate image id.
        OSError: if the file cannot be read.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise AnnotationError(f"{path}: not valid JSON: {e}") from e
    if not isinstance(doc, dict) or "images" not in doc or "annotations" not in doc:
        raise AnnotationError(f"{path}: missing 'images' or 'annotations' array")

    dims_by_id: dict[int, ImageDims] = {}
    names: dict[int, str] = {}
    order: list[int] = []
    for img in doc["images"]:
        try:
            image_id = img["id"]
            dims = ImageDims(float(img["width"]), float(img["height"]))
        except (KeyError, TypeError, ValueError) as e:
            raise AnnotationError(f"{path}: bad image entry {img!r}: {e}") from e
        if image_id in dims_by_id:
            raise AnnotationError(f"{path}: duplicate image id {image_id}")
        dims_by_id[image_id] = dims
        names[image_id] = str(img.get("file_name", ""))
        order.append(image_id)

    boxes_by_id: dict[int, list[Box]] = {i: [] for i in order}
    kept = bad = missing = clamped_away = 0
    for ann in doc["annotations"]:
        try:
            image_id = ann["image_id"]
            x, y, w, h = (float(v) for v in ann["bbox"])
        except (KeyError, TypeError, ValueError) as e:
            raise AnnotationError(f"{path}: bad annotation entry {ann!r}: {e}") from e
        if image_id not in dims_by_id:
            missing += 1
            continue
        if not all(math.isfinite(v) for v in (x, y, w, h)) or w <= 0 or h <= 0:
            bad += 1
            continue
        box = _clamp_box(x, y, w, h, dims_by_id[image_id])
        if box is None:
            clamped_away += 1
            continue
        boxes_by_id[image_id].append(box)
        kept += 1

    records = tuple(
        ImageRecord(i, dims_by_id[i], tuple(boxes_by_id[i]), names[i])
        for i in order
    )
    name = split_name if split_name is not None else os.path.splitext(
        os.path.basename(os.fspath(path)))[0]
    report = IngestReport(kept, bad, missing, clamped_away)
    return Dataset(name, records), report


def _nearest_rank(sorted_values: Sequence[int], q: float) -> int:
    """ceil(q*n)-th order statistic of an ascending sequence (1-indexed)."""
    n = len(sorted_values)
    rank = max(1, math.ceil(q * n))
    return sorted_values[min(rank, n) - 1]


def count_stats(d: Dataset) -> CountStats:
    """Statistics over per-image annotation counts."""
    if not d.records:
        raise ValueError("count_stats requires a non-empty dataset")
    counts = sorted(d.per_image_counts())
    mean = sum(counts) / len(counts)
    return CountStats(
        mean=mean,
        mean_rounded=round(mean),
        max=counts[-1],
        min=counts[0],
        p995=_nearest_rank(counts, 0.995),
        p005=_nearest_rank(counts, 0.005),
    )


def _rescaled_scales(d: Dataset, long_side: float, short_side: float) -> np.ndarray:
    scales = []
    for rec in d.records:
        factor = rescale_factor(rec.dims, long_side, short_side)
        scales.extend(box_scale(b) * factor for b in rec.boxes)
    return np.asarray(scales, dtype=np.float64)


def regular_histogram(values: Sequence[float], bin_width: float) -> Histogram:
    """Histogram with fixed-width bins starting at 0 and covering the max."""
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    values = np.asarray(values, dtype=np.float64)
    top = float(values.max()) if values.size else 0.0
    n_bins = max(1, math.ceil(top / bin_width + 1e-12))
    edges = np.arange(n_bins + 1, dtype=np.float64) * bin_width
    if values.size and edges[-1] < top:
        edges = np.append(edges, edges[-1] + bin_width)
    return Histogram.from_values(values, edges)


def scale_histogram(d: Dataset, long_side: float, short_side: float,
                    bin_width: float = 8.0) -> Histogram:
    """Histogram of rescaled box scales sqrt(w*h) over the whole dataset.

    Each box's scale is multiplied by the image's aspect-preserving
    rescale factor for the (long_side, short_side) target before binning.
    Bins start at 0 with the given width and extend to cover the maximum.
    """
    if not d.records:
        raise ValueError("scale_histogram requires a non-empty dataset")
    return regular_histogram(_rescaled_scales(d, long_side, short_side), bin_width)


def small_object_fraction(d: Dataset, long_side: float, short_side: float,
                          threshold: float = 32.0) -> float:
    """Fraction of boxes whose rescaled scale falls below the threshold."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if not d.records:
        raise ValueError("small_object_fraction requires a non-empty dataset")
    scales = _rescaled_scales(d, long_side, short_side)
    if scales.size == 0:
        raise ValueError("dataset has no annotations")
    return float(np.count_nonzero(scales < threshold) / scales.size)
