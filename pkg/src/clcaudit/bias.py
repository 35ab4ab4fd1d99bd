"""The two bias measurements plus reset flagging.

Classifier bias: Pearson correlation between a taboo classifier's
confidence and community alignment over the instances the classifier
declares taboo, with a percentile bootstrap confidence interval. A strongly
negative correlation means the classifier tracks community norms (common,
norm-conforming texts are not called taboo); positive or near-zero
correlation indicates bias against that community.

Dataset bias: per-community proportions of taboo-labeled texts that are
highly aligned (score >= tau), with per-column mean and sample standard
deviation; cells strictly above mean + SD are flagged as disproportionate.

Reset flagging: any taboo-labeled or taboo-declared instance that is highly
aligned with a community is routed to further review.

Bootstrap replicate seeds derive deterministically from the master seed
(replicate k uses seed XOR mix64(k)), so results are identical regardless
of execution order or parallelism. Degenerate resamples (zero variance) are
redrawn on the replicate's own seed chain and counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .taboo import TabooInstance

_U64 = 0xFFFFFFFFFFFFFFFF

RESET_REASON = "taboo-labeled but highly community-aligned"

_MAX_REDRAWS_PER_REPLICATE = 1000


class DegenerateCorrelationError(ValueError):
    """Raised when either vector has zero variance."""


class NoTabooDeclaredError(ValueError):
    """Raised when fewer than three instances are declared taboo."""


@dataclass(frozen=True)
class CorrelationResult:
    classifier_tag: str
    community_tag: str
    r: float
    ci_low: float
    ci_high: float
    n_pairs: int
    n_replicates: int
    seed: int
    redraws: int = 0


@dataclass(eq=False, frozen=True)
class ProportionMatrix:
    """Rows: community tags; columns: dataset-label test sets.

    Cells are unrounded high-alignment percentages. Column statistics use
    the sample standard deviation (n - 1 divisor); flags mark cells strictly
    greater than column mean + column SD."""

    row_tags: tuple[str, ...]
    col_labels: tuple[str, ...]
    cells: np.ndarray
    col_means: np.ndarray
    col_sds: np.ndarray
    flags: frozenset[tuple[str, str]]
    tau: float


@dataclass(frozen=True)
class ResetFlag:
    instance_id: str
    community_tag: str
    alignment: float
    reason: str = RESET_REASON


def _mix64(value: int) -> int:
    """splitmix64 finalizer; decorrelates consecutive integers."""
    z = (value + 0x9E3779B97F4A7C15) & _U64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
    return z ^ (z >> 31)


def replicate_seed(seed: int, index: int) -> int:
    return (seed ^ _mix64(index)) & _U64


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.ndim != 1 or xa.shape != ya.shape:
        raise ValueError(f"x and y must be equal-length vectors, got {xa.shape} and {ya.shape}")
    if len(xa) < 3:
        raise ValueError(f"need at least 3 pairs, got {len(xa)}")
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateCorrelationError("degenerate correlation: zero variance input")
    return float(dx @ dy) / math.sqrt(sxx * syy)


def _pearson_unchecked(xa: np.ndarray, ya: np.ndarray) -> float:
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    return float(dx @ dy) / math.sqrt(float(dx @ dx) * float(dy @ dy))


def classifier_bias(
    taboo: Sequence[tuple[float, bool]],
    alignment: Sequence[float],
    B: int = 10_000,
    seed: int = 0,
    *,
    classifier_tag: str = "",
    community_tag: str = "",
) -> CorrelationResult:
    """Correlation between taboo confidence and alignment on declared pairs.

    `taboo` holds (confidence, declared) per instance, parallel to
    `alignment`. Only declared pairs enter the statistic. The 95% interval
    is the [2.5, 97.5] percentile of r over B bootstrap resamples of the
    declared pairs (with replacement, resample size = n_pairs).
    """
    if len(taboo) != len(alignment):
        raise ValueError("taboo and alignment lists must be parallel")
    if B < 1:
        raise ValueError("need at least one bootstrap replicate")

    declared = [i for i, (_s, decided) in enumerate(taboo) if decided]
    if len(declared) < 3:
        raise NoTabooDeclaredError(
            f"no taboo-declared instances: {len(declared)} declared, need >= 3"
        )
    x = np.array([taboo[i][0] for i in declared], dtype=np.float64)
    y = np.asarray(alignment, dtype=np.float64)[declared]
    n = len(declared)

    r = pearson(x, y)

    rs = np.empty(B)
    redraws = 0
    for k in range(B):
        for attempt in range(_MAX_REDRAWS_PER_REPLICATE):
            rng = np.random.Generator(np.random.PCG64(replicate_seed(seed, k + attempt * B)))
            idx = rng.integers(0, n, size=n)
            xs = x[idx]
            ys = y[idx]
            if xs.min() < xs.max() and ys.min() < ys.max():
                rs[k] = _pearson_unchecked(xs, ys)
                break
            redraws += 1
        else:
            raise DegenerateCorrelationError(
                f"bootstrap resamples degenerate: replicate {k} found no "
                f"non-degenerate resample in {_MAX_REDRAWS_PER_REPLICATE} draws"
            )

    ci_low, ci_high = np.percentile(rs, [2.5, 97.5])
    return CorrelationResult(
        classifier_tag=classifier_tag,
        community_tag=community_tag,
        r=r,
        ci_low=float(ci_low),
        ci_high=float(ci_high),
        n_pairs=n,
        n_replicates=B,
        seed=seed,
        redraws=redraws,
    )


def aligned_proportion(scores: Sequence[float], tau: float) -> float:
    """Percentage of scores at or above tau."""
    arr = np.asarray(scores, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("no scores")
    return 100.0 * float(np.mean(arr >= tau))


def dataset_bias_matrix(
    columns: Sequence[tuple[str, Mapping[str, Sequence[float]]]],
    tau: float,
) -> ProportionMatrix:
    """High-alignment proportion matrix over taboo test sets.

    Each column is (dataset-label, {community tag -> alignment scores of the
    set's instances under that community's classifier}). Every column must
    cover the same communities; at least two are required for the sample SD.
    """
    if not columns:
        raise ValueError("no columns given")
    row_tags = tuple(columns[0][1].keys())
    if len(row_tags) < 2:
        raise ValueError(
            f"need at least 2 communities for column statistics, got {len(row_tags)}"
        )
    for label, per_tag in columns:
        if set(per_tag) != set(row_tags):
            raise ValueError(
                f"column {label!r} covers communities {sorted(per_tag)}, "
                f"expected {sorted(row_tags)}"
            )

    col_labels = tuple(label for label, _per_tag in columns)
    if len(set(col_labels)) != len(col_labels):
        raise ValueError(f"column labels must be unique, got {list(col_labels)}")
    cells = np.empty((len(row_tags), len(columns)))
    for j, (_label, per_tag) in enumerate(columns):
        for i, tag in enumerate(row_tags):
            cells[i, j] = aligned_proportion(per_tag[tag], tau)

    col_means = cells.mean(axis=0)
    col_sds = cells.std(axis=0, ddof=1)
    flags = frozenset(
        (row_tags[i], col_labels[j])
        for j in range(len(columns))
        for i in range(len(row_tags))
        if cells[i, j] > col_means[j] + col_sds[j]
    )
    return ProportionMatrix(
        row_tags=row_tags,
        col_labels=col_labels,
        cells=cells,
        col_means=col_means,
        col_sds=col_sds,
        flags=flags,
        tau=tau,
    )


def flag_for_reset(
    instances: Sequence[TabooInstance],
    alignments: Mapping[str, Mapping[str, float]],
    tau: float,
) -> list[ResetFlag]:
    """One flag per (taboo instance, community) with alignment >= tau.

    `alignments` maps instance id -> community tag -> alignment score and
    must cover every instance. Instances that are neither taboo-labeled nor
    taboo-declared emit nothing.
    """
    flags: list[ResetFlag] = []
    for inst in instances:
        if inst.id not in alignments:
            raise ValueError(f"missing alignments for instance {inst.id!r}")
        if not (inst.label or inst.taboo_decision is True):
            continue
        for tag in sorted(alignments[inst.id]):
            value = alignments[inst.id][tag]
            if value >= tau:
                flags.append(ResetFlag(instance_id=inst.id, community_tag=tag, alignment=value))
    return flags
