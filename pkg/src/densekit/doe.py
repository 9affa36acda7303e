"""L9(3^4) orthogonal design and analysis of range (ANOR).

The canonical nine-run array assigns four 3-level factors to columns
built from two mutually orthogonal Latin squares, normalized so the
first run sits at level 0 of every factor. ANOR averages the response
per factor level, ranks factors by the spread of those level means, and
recommends the best level of each factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "FactorSpec",
    "FactorAnalysis",
    "AnorReport",
    "build_l9",
    "validate_l9",
    "run_experiment",
    "anor",
]

N_RUNS = 9
N_FACTORS = 4
N_LEVELS = 3


@dataclass(frozen=True)
class FactorSpec:
    """A named factor with exactly three candidate values."""

    name: str
    levels: tuple[float, float, float]

    def __post_init__(self):
        if len(self.levels) != N_LEVELS or len(set(self.levels)) != N_LEVELS:
            raise ValueError(f"factor {self.name!r} needs 3 distinct levels")


@dataclass(frozen=True)
class FactorAnalysis:
    name: str
    level_means: tuple[float, float, float]
    range: float
    best_level: int  # index into levels; ties resolve to the lowest index
    best_value: float


@dataclass(frozen=True)
class AnorReport:
    factors: tuple[FactorAnalysis, ...]
    ranking: tuple[str, ...]  # factor names, descending range
    recommendation: dict[str, float]  # factor name -> recommended value


def build_l9() -> np.ndarray:
    """The canonical 9x4 orthogonal array of level indices {0, 1, 2}.

    Columns are (a, b, a+b mod 3, a+2b mod 3) over all (a, b) pairs in
    row-major order, so run 0 is all zeros. Each column holds each level
    exactly three times and every ordered column pair covers all nine
    level combinations exactly once.
    """
    rows = []
    for a in range(N_LEVELS):
        for b in range(N_LEVELS):
            rows.append((a, b, (a + b) % N_LEVELS, (a + 2 * b) % N_LEVELS))
    return np.array(rows, dtype=np.int64)


def validate_l9(array: np.ndarray) -> None:
    """Raise ValueError unless the array satisfies both balance invariants."""
    arr = np.asarray(array)
    if arr.shape != (N_RUNS, N_FACTORS):
        raise ValueError(f"expected a {N_RUNS}x{N_FACTORS} array, got {arr.shape}")
    for col in range(N_FACTORS):
        if sorted(arr[:, col].tolist()) != [0, 0, 0, 1, 1, 1, 2, 2, 2]:
            raise ValueError(f"column {col} is not level-balanced")
    for i in range(N_FACTORS):
        for j in range(N_FACTORS):
            if i == j:
                continue
            pairs = {(int(a), int(b)) for a, b in zip(arr[:, i], arr[:, j])}
            if len(pairs) != N_RUNS:
                raise ValueError(f"columns ({i}, {j}) do not cover all 9 pairs")


def run_values(array: np.ndarray, factors: Sequence[FactorSpec],
               run: int) -> tuple[float, ...]:
    """Concrete factor values of one run."""
    return tuple(factors[f].levels[int(array[run, f])] for f in range(N_FACTORS))


def run_experiment(array: np.ndarray, factors: Sequence[FactorSpec],
                   respond: Callable[..., float]) -> list[float]:
    """Evaluate the response on each run's concrete values, in run order.

    ``respond`` is called with the four factor values as positional
    arguments and should be deterministic. A failing run aborts with an
    error naming the run index.
    """
    validate_l9(array)
    if len(factors) != N_FACTORS:
        raise ValueError(f"expected {N_FACTORS} factors, got {len(factors)}")
    scores = []
    for run in range(N_RUNS):
        values = run_values(array, factors, run)
        try:
            scores.append(float(respond(*values)))
        except Exception as e:
            raise RuntimeError(f"response function failed on run {run}: {e}") from e
    return scores


def anor(array: np.ndarray, scores: Sequence[float],
         factors: Sequence[FactorSpec], minimize: bool = False) -> AnorReport:
    """Analysis of range over the nine run scores.

    Per factor: the mean response at each level, the range (max minus min
    of the level means), and the best level (argmax, or argmin when
    ``minimize``; ties resolve to the lowest level index). Factors are
    ranked by descending range. The recommendation combines each factor's
    best level and is invariant under positive affine transformations of
    the scores.
    """
    validate_l9(array)
    if len(scores) != N_RUNS:
        raise ValueError(f"expected {N_RUNS} scores, got {len(scores)}")
    if len(factors) != N_FACTORS:
        raise ValueError(f"expected {N_FACTORS} factors, got {len(factors)}")
    arr = np.asarray(array)
    values = np.asarray(scores, dtype=np.float64)

    analyses = []
    for f, spec in enumerate(factors):
        level_means = tuple(
            float(values[arr[:, f] == level].mean()) for level in range(N_LEVELS)
        )
        picker = min if minimize else max
        best = level_means.index(picker(level_means))
        analyses.append(FactorAnalysis(
            name=spec.name,
            level_means=level_means,
            range=max(level_means) - min(level_means),
            best_level=best,
            best_value=spec.levels[best],
        ))
    ranking = tuple(
        fa.name for fa in sorted(analyses, key=lambda fa: -fa.range)
    )
    recommendation = {fa.name: fa.best_value for fa in analyses}
    return AnorReport(tuple(analyses), ranking, recommendation)
