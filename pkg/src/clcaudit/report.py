"""Rendering of audit outputs.

Views only: rendering never changes stored values. Proportions display with
one decimal, correlations with four, survival fractions with six. Markdown
matrix rendering wraps flagged cells in ** and appends the column mean and
sample-SD rows; TSV output is plain numbers for machine consumption. The
consolidated report is deterministic given its inputs: fixed section order,
fixed formatting, timestamp from an injectable clock, and a SHA-256 digest
per input file.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

from ._version import __version__
from .bias import CorrelationResult, ProportionMatrix, ResetFlag
from .calibrate import CcdfCurve, ValidationMatrix

Matrix = ValidationMatrix | ProportionMatrix


def _matrix_rows(matrix: Matrix) -> tuple[list[list[str]], set[tuple[int, int]]]:
    """Row-major cell text (one decimal) plus flagged cell coordinates."""
    if isinstance(matrix, ProportionMatrix):
        cols = matrix.col_labels
        flagged = {
            (matrix.row_tags.index(tag), cols.index(label)) for tag, label in matrix.flags
        }
    else:
        cols = matrix.col_tags
        flagged = set()

    body = [
        [tag] + [f"{matrix.cells[i, j]:.1f}" for j in range(len(cols))]
        for i, tag in enumerate(matrix.row_tags)
    ]
    if isinstance(matrix, ProportionMatrix):
        body.append(["Average"] + [f"{m:.1f}" for m in matrix.col_means])
        body.append(["Std. Dev."] + [f"{s:.1f}" for s in matrix.col_sds])
    return [["CLC", *cols], *body], flagged


def render_matrix(matrix: Matrix, format: str = "tsv") -> str:
    """Render a validation or proportion matrix as TSV or Markdown."""
    rows, flagged = _matrix_rows(matrix)
    if format == "tsv":
        return "\n".join("\t".join(row) for row in rows) + "\n"
    if format == "markdown":
        header, *body = rows
        out = ["| " + " | ".join(header) + " |", "|" + " --- |" * len(header)]
        for i, row in enumerate(body):
            cells = [
                f"**{cell}**" if (i, j) in flagged else cell
                for j, cell in enumerate(row[1:])
            ]
            out.append("| " + " | ".join([row[0], *cells]) + " |")
        return "\n".join(out) + "\n"
    raise ValueError(f"unknown format {format!r}; use 'tsv' or 'markdown'")


def emit_ccdf_csv(curves: Sequence[CcdfCurve]) -> str:
    """CSV `threshold,community,survival` in grid-major order."""
    points = sorted(
        (t, curve.community_id, s)
        for curve in curves
        for t, s in zip(curve.grid, curve.survival)
    )
    lines = ["threshold,community,survival"]
    lines += [f"{t:.10g},{tag},{s:.6f}" for t, tag, s in points]
    return "\n".join(lines) + "\n"


def emit_correlations_csv(results: Sequence[CorrelationResult]) -> str:
    """CSV `classifier,community,r,ci_low,ci_high,n_pairs`."""
    lines = ["classifier,community,r,ci_low,ci_high,n_pairs"]
    for res in results:
        if res.ci_low > res.ci_high:
            raise ValueError(
                f"invalid interval for ({res.classifier_tag}, {res.community_tag}): "
                f"ci_low {res.ci_low} > ci_high {res.ci_high}"
            )
        lines.append(
            f"{res.classifier_tag},{res.community_tag},"
            f"{res.r:.4f},{res.ci_low:.4f},{res.ci_high:.4f},{res.n_pairs}"
        )
    return "\n".join(lines) + "\n"


def emit_reset_flags_csv(flags: Sequence[ResetFlag]) -> str:
    """CSV `id,community,alignment`."""
    lines = ["id,community,alignment"]
    lines += [f"{f.instance_id},{f.community_tag},{f.alignment:.4f}" for f in flags]
    return "\n".join(lines) + "\n"


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class AuditReport:
    """Consolidated audit outputs plus full reproducibility metadata."""

    metadata: dict
    validation: ValidationMatrix | None = None
    correlations: list[CorrelationResult] = field(default_factory=list)
    proportions: ProportionMatrix | None = None
    reset_flags: list[ResetFlag] = field(default_factory=list)


def build_report(
    *,
    seed: int,
    tau: float,
    decision_threshold: float,
    input_paths: Iterable[str | Path] = (),
    validation: ValidationMatrix | None = None,
    correlations: Sequence[CorrelationResult] = (),
    proportions: ProportionMatrix | None = None,
    reset_flags: Sequence[ResetFlag] = (),
    clock: Callable[[], str] | None = None,
) -> tuple[AuditReport, str]:
    """Assemble the audit report and its Markdown document.

    Two calls with the same inputs and the same injected clock produce
    byte-identical documents. Sections without data are omitted entirely.
    """
    clock = clock or _utc_now_iso
    digests = {str(p): file_digest(p) for p in sorted(str(p) for p in input_paths)}
    report = AuditReport(
        metadata={
            "tool_version": __version__,
            "generated": clock(),
            "seed": seed,
            "tau": tau,
            "decision_threshold": decision_threshold,
            "input_digests": digests,
        },
        validation=validation,
        correlations=list(correlations),
        proportions=proportions,
        reset_flags=list(reset_flags),
    )

    meta = report.metadata
    out = [
        "# Community alignment audit",
        "",
        "## Metadata",
        "",
        f"- tool version: {meta['tool_version']}",
        f"- generated: {meta['generated']}",
        f"- seed: {meta['seed']}",
        f"- tau (high-alignment threshold): {meta['tau']:g}",
        f"- taboo decision threshold: {meta['decision_threshold']:g}",
    ]
    if digests:
        out.append("- input digests (sha256):")
        out += [f"  - `{path}`: `{digest}`" for path, digest in digests.items()]

    if validation is not None:
        out += ["", "## Validation matrix", "",
                f"High-alignment percentages at tau = {validation.tau:g}; rows are "
                "classifiers, columns are community validation sets.", "",
                render_matrix(validation, "markdown").rstrip("\n")]

    if report.correlations:
        out += ["", "## Taboo-classifier correlations", "",
                "Pearson r between taboo confidence and community alignment over "
                "taboo-declared instances, with 95% bootstrap intervals. Negative "
                "correlation means the classifier tracks the community's norms.", "",
                "| classifier | community | r | 95% CI | pairs |",
                "| --- | --- | --- | --- | --- |"]
        out += [
            f"| {res.classifier_tag} | {res.community_tag} | {res.r:.4f} "
            f"| [{res.ci_low:.4f}, {res.ci_high:.4f}] | {res.n_pairs} |"
            for res in report.correlations
        ]

    if proportions is not None:
        out += ["", "## Dataset high-alignment proportions", "",
                f"Share of each taboo test set scoring >= {proportions.tau:g} per "
                "community classifier. Bold cells exceed the column mean by more "
                "than one sample standard deviation.", "",
                render_matrix(proportions, "markdown").rstrip("\n")]

    if report.reset_flags:
        out += ["", "## Reset flags", "",
                f"{len(report.reset_flags)} (instance, community) pairs where a "
                "taboo-labeled instance is highly aligned; each should be "
                "re-examined.", "",
                "| id | community | alignment |", "| --- | --- | --- |"]
        out += [
            f"| {f.instance_id} | {f.community_tag} | {f.alignment:.4f} |"
            for f in report.reset_flags
        ]

    return report, "\n".join(out) + "\n"
