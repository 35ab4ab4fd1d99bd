"""Taboo-annotated datasets and taboo-classifier confidence scores.

A test set is the subset of a labeled collection carrying one taboo label
(hate, offense, toxicity, sexism, ...). Ingestion is schema-driven: the
caller names the text/label/id columns, so heterogeneous source files need
no per-corpus code. Classifier confidences arrive either from score files
(CSV `id,classifier_tag,score`) or live from a toxicity-scoring HTTP API.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field, replace
from itertools import chain
from typing import Callable, Iterable, Sequence

import httpx

from .corpus import normalize

log = logging.getLogger(__name__)


class TabooSchemaError(ValueError):
    """Raised when a declared column is missing from the input header."""


class LabelNotFoundError(ValueError):
    """Raised when label filtering keeps no rows."""


class ToxicityAuthError(RuntimeError):
    """Raised on an authentication failure from the toxicity API (fatal)."""


@dataclass(frozen=True)
class TabooInstance:
    id: str
    norm_text: str
    label: str
    taboo_score: float | None = None
    taboo_decision: bool | None = None


@dataclass(frozen=True)
class TabooDataset:
    name: str
    label: str
    instances: tuple[TabooInstance, ...]

    def __len__(self) -> int:
        return len(self.instances)


@dataclass(frozen=True)
class DatasetSchema:
    text_column: str
    label_column: str
    id_column: str | None = None


@dataclass
class TabooParseStats:
    total_rows: int = 0
    kept: int = 0
    malformed: int = 0
    observed_labels: set[str] = field(default_factory=set)


@dataclass
class ScoreImportStats:
    attached: int = 0
    rejected: int = 0
    duplicates: int = 0
    missing_ids: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class ToxicityClientConfig:
    endpoint: str
    api_key: str
    requests_per_second: float = 1.0
    max_retries: int = 3
    timeout: float = 10.0

    def __post_init__(self) -> None:
        if self.requests_per_second <= 0:
            raise ValueError("requests_per_second must be positive")


@dataclass
class ToxicityResult:
    """Scores keyed by id in input order, plus an error ledger for ids that
    failed after retries. Failures are never silently dropped."""

    scores: dict[str, float] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)


def parse_taboo_dataset(
    stream: Iterable[str],
    schema: DatasetSchema,
    keep_label: str,
    *,
    name: str = "dataset",
) -> tuple[TabooDataset, TabooParseStats]:
    """Read a delimited file with a header row and keep one label's rows.

    The delimiter (tab or comma) is detected from the header row. Label
    matching is exact after whitespace trimming. Text is normalized the same
    way as community corpora.
    """
    lines = iter(stream)
    header_line = next(lines, None)
    if header_line is None:
        raise TabooSchemaError("empty input: no header row")
    delimiter = "\t" if "\t" in header_line else ","

    reader = csv.reader(chain([header_line], lines), delimiter=delimiter)
    header = next(reader)
    columns = {name_: i for i, name_ in enumerate(header)}
    for col in (schema.text_column, schema.label_column, schema.id_column):
        if col is not None and col not in columns:
            raise TabooSchemaError(
                f"missing column {col!r}; file columns are {header}"
            )
    text_i = columns[schema.text_column]
    label_i = columns[schema.label_column]
    id_i = columns[schema.id_column] if schema.id_column else None

    stats = TabooParseStats()
    instances: list[TabooInstance] = []
    needed = max(i for i in (text_i, label_i, id_i) if i is not None) + 1
    for rownum, row in enumerate(reader, start=1):
        if not row:
            continue
        stats.total_rows += 1
        if len(row) < needed:
            stats.malformed += 1
            continue
        label = row[label_i].strip()
        stats.observed_labels.add(label)
        if label != keep_label:
            continue
        uid = row[id_i].strip() if id_i is not None else ""
        if not uid:
            uid = f"{name}:{rownum}"
        instances.append(
            TabooInstance(id=uid, norm_text=normalize(row[text_i]), label=keep_label)
        )
        stats.kept += 1

    if not instances:
        raise LabelNotFoundError(
            f"label {keep_label!r} not found in {name}; observed labels: "
            f"{sorted(stats.observed_labels)}"
        )
    log.info("%s: kept %d of %d rows with label %r", name, stats.kept, stats.total_rows, keep_label)
    return TabooDataset(name=name, label=keep_label, instances=tuple(instances)), stats


def import_taboo_scores(
    dataset: TabooDataset,
    stream: Iterable[str],
    decision_threshold: float,
    *,
    classifier_tag: str | None = None,
) -> tuple[TabooDataset, ScoreImportStats]:
    """Attach classifier confidences from CSV `id,classifier_tag,score`.

    The decision is the closed-bound threshold test score >= threshold.
    Ids without a score are reported in the stats and left score-less;
    texts and labels are never altered.
    """
    stats = ScoreImportStats()
    scores: dict[str, float] = {}
    for row in csv.reader(stream):
        if not row:
            continue
        if len(row) != 3:
            stats.rejected += 1
            continue
        uid, tag, raw = (cell.strip() for cell in row)
        if classifier_tag is not None and tag != classifier_tag:
            continue
        try:
            value = float(raw)
        except ValueError:
            stats.rejected += 1
            continue
        if not 0.0 <= value <= 1.0:
            stats.rejected += 1
            continue
        if uid in scores:
            stats.duplicates += 1
        scores[uid] = value

    instances = []
    for inst in dataset.instances:
        if inst.id in scores:
            value = scores[inst.id]
            instances.append(
                replace(inst, taboo_score=value, taboo_decision=value >= decision_threshold)
            )
            stats.attached += 1
        else:
            stats.missing_ids.append(inst.id)
            instances.append(inst)

    if stats.missing_ids:
        log.warning(
            "%s: %d of %d instances have no imported score",
            dataset.name, len(stats.missing_ids), len(dataset.instances),
        )
    return replace(dataset, instances=tuple(instances)), stats


def _parse_toxicity_response(payload: dict) -> float:
    value = payload["attributeScores"]["TOXICITY"]["summaryScore"]["value"]
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"toxicity score {value} outside [0, 1]")
    return value


def fetch_toxicity(
    cfg: ToxicityClientConfig,
    texts: Sequence[tuple[str, str]],
    *,
    transport: httpx.BaseTransport | None = None,
    clock: Callable[[], float] = time.monotonic,
    sleep: Callable[[float], None] = time.sleep,
) -> ToxicityResult:
    """Score texts one request at a time, honoring the rate cap.

    Request body: {"comment": {"text": ...}, "requestedAttributes":
    {"TOXICITY": {}}} with the API key as a query parameter; the summary
    toxicity probability is read from the response. HTTP 429 and 5xx
    responses (and transport errors) are retried with exponential backoff up
    to max_retries; auth failures abort the whole run. `clock` and `sleep`
    exist so tests can drive time.
    """
    result = ToxicityResult()
    min_interval = 1.0 / cfg.requests_per_second
    last_request: float | None = None

    with httpx.Client(timeout=cfg.timeout, transport=transport) as client:
        for uid, text in texts:
            failure = ""
            for attempt in range(cfg.max_retries + 1):
                now = clock()
                if last_request is not None and now - last_request < min_interval:
                    sleep(min_interval - (now - last_request))
                    now = clock()
                last_request = now

                try:
                    response = client.post(
                        cfg.endpoint,
                        params={"key": cfg.api_key},
                        json={"comment": {"text": text}, "requestedAttributes": {"TOXICITY": {}}},
                    )
                except httpx.TransportError as exc:
                    failure = f"transport error: {exc}"
                    if attempt < cfg.max_retries:
                        sleep(min(2.0**attempt, 30.0))
                        continue
                    break

                if response.status_code in (401, 403):
                    raise ToxicityAuthError(
                        f"toxicity API authentication failed (HTTP {response.status_code})"
                    )
                if response.status_code == 429 or response.status_code >= 500:
                    failure = f"HTTP {response.status_code}"
                    if attempt < cfg.max_retries:
                        sleep(min(2.0**attempt, 30.0))
                        continue
                    failure = f"HTTP {response.status_code} after {cfg.max_retries} retries"
                    break
                if response.status_code != 200:
                    failure = f"HTTP {response.status_code}"
                    break

                try:
                    result.scores[uid] = _parse_toxicity_response(response.json())
                except (KeyError, TypeError, ValueError) as exc:
                    failure = f"bad response: {exc}"
                break
            if failure and uid not in result.scores:
                result.errors[uid] = failure

    if result.errors:
        log.warning("toxicity fetch: %d of %d texts failed", len(result.errors), len(texts))
    return result
