"""Exact rectangle-union area and Monte-Carlo crop-coverage simulation.

Coverage of a set of crop windows is area(union of windows) / area(image);
since every window lies inside the image this equals the IoU of the union
with the full image. Each simulation trial draws one crop per epoch and
uses an RNG stream derived from (seed, trial index), so results are
reproducible regardless of scheduling or worker count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Histogram
from .geometry import Box, ImageDims
from .augment import sample_crop
from .util import parallel_map

__all__ = ["CoverageDistribution", "union_area", "simulate_coverage"]


@dataclass(frozen=True)
class CoverageDistribution:
    samples: tuple[float, ...]
    histogram: Histogram
    mean: float
    stddev: float


def union_area(windows: Sequence[Box]) -> float:
    """Exact area of the union of boxes by a coordinate-compression sweep.

    Duplicate rectangles are collapsed first (draws repeating the same
    fixed anchor are common), zero-area boxes contribute nothing, and the
    empty list yields 0.
    """
    rects = sorted({(b.x1, b.y1, b.x2, b.y2)
                    for b in windows if b.x2 > b.x1 and b.y2 > b.y1})
    if not rects:
        return 0.0
    xs = sorted({x for r in rects for x in (r[0], r[2])})
    total = 0.0
    for x0, x1 in zip(xs, xs[1:]):
        spans = sorted((r[1], r[3]) for r in rects if r[0] <= x0 and r[2] >= x1)
        if not spans:
            continue
        covered = 0.0
        cur_lo, cur_hi = spans[0]
        for lo, hi in spans[1:]:
            if lo > cur_hi:
                covered += cur_hi - cur_lo
                cur_lo, cur_hi = lo, hi
            elif hi > cur_hi:
                cur_hi = hi
        covered += cur_hi - cur_lo
        total += covered * (x1 - x0)
    return total


def _run_trial(strategy: str, dims: ImageDims, crop_w: float, crop_h: float,
               epochs: int, seed: int, trial: int) -> float:
    rng = np.random.default_rng([seed, trial])
    windows = [sample_crop(strategy, dims, crop_w, crop_h, rng).window
               for _ in range(epochs)]
    return union_area(windows) / dims.area


def simulate_coverage(strategy: str, dims: ImageDims, crop_w: float,
                      crop_h: float, epochs: int, trials: int, seed: int = 0,
                      threads: int = 1, bins: int = 50) -> CoverageDistribution:
    """Monte-Carlo estimate of crop coverage over simulated epochs.

    One crop window is drawn per epoch (one pass over the image per
    epoch); each of ``trials`` independent trials records the coverage of
    its window union. Windows within a trial are drawn sequentially from
    the trial's stream, so rerunning with more epochs extends the same
    window sequence and can only raise each trial's coverage.
    """
    if epochs < 1 or trials < 1:
        raise ValueError("epochs and trials must be >= 1")
    samples = parallel_map(
        lambda t: _run_trial(strategy, dims, crop_w, crop_h, epochs, seed, t),
        range(trials), threads=threads)
    values = np.asarray(samples, dtype=np.float64)
    hist = Histogram.from_values(values, np.linspace(0.0, 1.0, bins + 1))
    return CoverageDistribution(
        samples=tuple(float(v) for v in values),
        histogram=hist,
        mean=float(values.mean()),
        stddev=float(values.std()),
    )
