"""Alignment-score survival curves and high-alignment threshold selection.

The survival function of a community's alignment scores (fraction of scores
at or above each grid threshold) drives the choice of the high-alignment
cutoff tau: the largest grid threshold at which every community still keeps
at least the target fraction of its own validation comments. A higher tau
sharpens cross-community separation; the coverage floor keeps it honest.

"Highly aligned" is a closed bound everywhere: score >= tau counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .clc import ClcModel, ScoreTable, score
from .corpus import CommunityCorpus


class NoScoresError(ValueError):
    """Raised when a survival curve is requested for an empty score list."""


class CoverageUnattainableError(ValueError):
    """Raised when no grid threshold satisfies the coverage floor."""

    def __init__(self, message: str, best_coverage: float, best_threshold: float):
        super().__init__(message)
        self.best_coverage = best_coverage
        self.best_threshold = best_threshold


@dataclass(frozen=True)
class ThresholdConfig:
    tau: float = 0.85
    target_coverage: float = 0.52
    grid_step: float = 0.05

    def __post_init__(self) -> None:
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        if not 0.0 < self.target_coverage < 1.0:
            raise ValueError(f"target_coverage must lie in (0, 1), got {self.target_coverage}")
        if not 0.0 < self.grid_step <= 1.0:
            raise ValueError(f"grid_step must lie in (0, 1], got {self.grid_step}")


@dataclass(frozen=True)
class CcdfCurve:
    """Survival function of alignment scores on an ascending threshold grid."""

    community_id: str
    grid: tuple[float, ...]
    survival: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.grid) != len(self.survival):
            raise ValueError("grid and survival must have equal length")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("grid must be strictly ascending")
        if any(b > a for a, b in zip(self.survival, self.survival[1:])):
            raise ValueError("survival must be non-increasing")


@dataclass(eq=False, frozen=True)
class ValidationMatrix:
    """Rows: classifier tags; columns: validation-set tags; cells: percentage
    of the column's utterances scoring >= tau under the row's classifier.
    Cells are stored unrounded; rendering rounds to one decimal."""

    row_tags: tuple[str, ...]
    col_tags: tuple[str, ...]
    cells: np.ndarray
    tau: float


def default_grid(step: float = 0.05) -> tuple[float, ...]:
    """Thresholds 0.0 to 1.0 inclusive at the given step."""
    n = round(1.0 / step)
    return tuple(round(i * step, 10) for i in range(n + 1))


def compute_ccdf(
    scores: Sequence[float],
    grid: Sequence[float],
    community_id: str = "",
) -> CcdfCurve:
    """survival[i] = |{s : s >= grid[i]}| / |scores| (closed bound)."""
    if len(scores) == 0:
        raise NoScoresError(f"no scores for community {community_id!r}")
    arr = np.sort(np.asarray(scores, dtype=np.float64))
    grid_arr = np.asarray(grid, dtype=np.float64)
    counts = len(arr) - np.searchsorted(arr, grid_arr, side="left")
    survival = counts / len(arr)
    return CcdfCurve(community_id, tuple(float(g) for g in grid), tuple(map(float, survival)))


def select_threshold(curves: Sequence[CcdfCurve], target_coverage: float) -> float:
    """Largest grid threshold keeping min-over-communities survival at or
    above the coverage floor."""
    if not curves:
        raise ValueError("no curves given")
    grid = curves[0].grid
    for curve in curves[1:]:
        if curve.grid != grid:
            raise ValueError("curves must share the same grid")

    min_survival = np.min([c.survival for c in curves], axis=0)
    feasible = [g for g, ms in zip(grid, min_survival) if ms >= target_coverage]
    if not feasible:
        best_i = int(np.argmax(min_survival))
        raise CoverageUnattainableError(
            f"coverage unattainable: floor {target_coverage:.4f}, best achievable "
            f"{min_survival[best_i]:.4f} at threshold {grid[best_i]:g}",
            best_coverage=float(min_survival[best_i]),
            best_threshold=float(grid[best_i]),
        )
    return max(feasible)


def _column_scores(
    scorer: ClcModel | tuple[str, ScoreTable],
    val_set: CommunityCorpus,
) -> np.ndarray:
    if isinstance(scorer, ClcModel):
        return np.array([score(scorer, u.norm_text) for u in val_set.utterances])
    tag, table = scorer
    out = np.empty(len(val_set.utterances))
    for i, u in enumerate(val_set.utterances):
        try:
            out[i] = table.entries[u.id][tag]
        except KeyError:
            raise ValueError(
                f"score table has no score for id {u.id!r}, community {tag!r}"
            ) from None
    return out


def validation_matrix(
    scorers: Sequence[ClcModel] | ScoreTable,
    val_sets: Sequence[CommunityCorpus],
    tau: float,
) -> ValidationMatrix:
    """Cross matrix of high-alignment percentages.

    `scorers` is either trained models (rows in the given order) or a
    ScoreTable covering every validation utterance (rows are the table's
    community tags, sorted).
    """
    for vs in val_sets:
        if not vs.utterances:
            raise ValueError(f"empty validation set: {vs.community_id!r}")

    if isinstance(scorers, ScoreTable):
        rows: list[ClcModel | tuple[str, ScoreTable]] = [
            (tag, scorers) for tag in scorers.community_tags()
        ]
        row_tags = tuple(tag for tag, _table in rows)
    else:
        rows = list(scorers)
        row_tags = tuple(m.community_id for m in rows)
    if not rows:
        raise ValueError("no scorers given")

    cells = np.empty((len(rows), len(val_sets)))
    for j, vs in enumerate(val_sets):
        for i, scorer in enumerate(rows):
            col = _column_scores(scorer, vs)
            cells[i, j] = 100.0 * float(np.mean(col >= tau))

    return ValidationMatrix(
        row_tags=row_tags,
        col_tags=tuple(vs.community_id for vs in val_sets),
        cells=cells,
        tau=tau,
    )
