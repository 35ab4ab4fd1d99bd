"""Community corpus ingestion and training-set assembly.

Input format: newline-delimited JSON, one object per line, with a required
string field "body" plus optional "subreddit" (string), "created_utc"
(integer epoch seconds) and "id" (string; auto-assigned "<source>:<lineno>"
when absent). This matches public comment dumps restricted to those fields.

Text normalization lowercases, removes all Unicode punctuation (categories
Pc, Pd, Pe, Pf, Pi, Po, Ps), collapses whitespace runs to single spaces and
trims the ends. Bodies equal to the deletion sentinels "[deleted]" or
"[removed]", and bodies that normalize to the empty string, are skipped.

All produced corpora are immutable and safe to share across threads.
"""

from __future__ import annotations

import json
import logging
import unicodedata
from dataclasses import dataclass
from datetime import datetime, timezone
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

DELETION_SENTINELS = frozenset({"[deleted]", "[removed]"})

Month = tuple[int, int]  # (year, month)


class InsufficientNegativesError(ValueError):
    """Raised when the pooled other-community corpora cannot fill the 1:1 quota."""


@dataclass(frozen=True)
class Utterance:
    """One comment with raw text, normalized text and provenance."""

    id: str
    raw_text: str
    norm_text: str
    source: str = ""
    created_utc: int = 0


@dataclass(frozen=True)
class CommunityCorpus:
    community_id: str
    utterances: tuple[Utterance, ...]

    def __post_init__(self) -> None:
        if not self.community_id:
            raise ValueError("community_id must be nonempty")

    def __len__(self) -> int:
        return len(self.utterances)


@dataclass(frozen=True)
class TrainingSet:
    """All target utterances as positives plus 1:1 sampled negatives.

    Each negative carries the community it was drawn from; negatives are
    sampled without replacement, equally across the other communities.
    """

    community_id: str
    positives: tuple[Utterance, ...]
    negatives: tuple[tuple[Utterance, str], ...]
    seed: int


@dataclass
class IngestStats:
    total_lines: int = 0
    kept: int = 0
    skipped_malformed: int = 0
    skipped_deleted: int = 0
    skipped_empty: int = 0
    skipped_duplicate_id: int = 0


@dataclass
class SplitStats:
    train: int = 0
    val: int = 0
    dropped_unknown_time: int = 0
    dropped_out_of_range: int = 0


@lru_cache(maxsize=None)
def _is_punctuation(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def normalize(raw_text: str) -> str:
    """Lowercase, strip Unicode punctuation, collapse whitespace. Idempotent."""
    lowered = raw_text.lower()
    stripped = "".join(ch for ch in lowered if not _is_punctuation(ch))
    return " ".join(stripped.split())


def parse_corpus(
    stream: Iterable[str | bytes],
    community_id: str,
    *,
    source_name: str = "stream",
) -> tuple[CommunityCorpus, IngestStats]:
    """Parse a line-oriented record stream into a normalized corpus.

    Records are kept in input order. Malformed lines (bad JSON, missing or
    non-string "body", bad "created_utc", undecodable bytes, duplicate ids)
    are skipped and counted; stream-level I/O errors propagate.
    """
    stats = IngestStats()
    utterances: list[Utterance] = []
    seen_ids: set[str] = set()

    for lineno, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            try:
                line = line.decode("utf-8")
            except UnicodeDecodeError:
                stats.total_lines += 1
                stats.skipped_malformed += 1
                continue
        if not line.strip():
            continue
        stats.total_lines += 1

        try:
            record = json.loads(line)
        except json.JSONDecodeError:
            stats.skipped_malformed += 1
            continue
        if not isinstance(record, dict) or not isinstance(record.get("body"), str):
            stats.skipped_malformed += 1
            continue

        body = record["body"]
        if body in DELETION_SENTINELS:
            stats.skipped_deleted += 1
            continue

        norm = normalize(body)
        if not norm:
            stats.skipped_empty += 1
            continue

        created = record.get("created_utc", 0)
        try:
            created = int(created)
        except (TypeError, ValueError):
            stats.skipped_malformed += 1
            continue

        uid = record.get("id") or f"{source_name}:{lineno}"
        if not isinstance(uid, str):
            uid = str(uid)
        if uid in seen_ids:
            stats.skipped_duplicate_id += 1
            continue
        seen_ids.add(uid)

        source = record.get("subreddit") or ""
        utterances.append(
            Utterance(id=uid, raw_text=body, norm_text=norm, source=source, created_utc=created)
        )
        stats.kept += 1

    skipped = stats.total_lines - stats.kept
    if skipped:
        log.info(
            "parsed %s for %s: kept %d of %d records (%d skipped)",
            source_name, community_id, stats.kept, stats.total_lines, skipped,
        )
    return CommunityCorpus(community_id, tuple(utterances)), stats


def _utc_month(created_utc: int) -> Month:
    dt = datetime.fromtimestamp(created_utc, tz=timezone.utc)
    return (dt.year, dt.month)


def split_by_month(
    corpus: CommunityCorpus,
    train_months: set[Month],
    val_months: set[Month],
) -> tuple[CommunityCorpus, CommunityCorpus, SplitStats]:
    """Partition a corpus by UTC calendar month.

    Utterances with an unknown timestamp (created_utc == 0) or a month in
    neither set are dropped and counted.
    """
    overlap = train_months & val_months
    if overlap:
        raise ValueError(f"train and validation month sets overlap: {sorted(overlap)}")

    stats = SplitStats()
    train: list[Utterance] = []
    val: list[Utterance] = []
    for u in corpus.utterances:
        if u.created_utc == 0:
            stats.dropped_unknown_time += 1
            continue
        month = _utc_month(u.created_utc)
        if month in train_months:
            train.append(u)
        elif month in val_months:
            val.append(u)
        else:
            stats.dropped_out_of_range += 1
    stats.train = len(train)
    stats.val = len(val)

    if stats.dropped_unknown_time:
        log.warning(
            "%s: dropped %d utterances with unknown timestamps",
            corpus.community_id, stats.dropped_unknown_time,
        )
    return (
        CommunityCorpus(corpus.community_id, tuple(train)),
        CommunityCorpus(corpus.community_id, tuple(val)),
        stats,
    )


def _negative_quotas(need: int, others: Sequence[CommunityCorpus]) -> dict[str, int]:
    """Split `need` draws equally across communities, redistributing any
    shortfall from exhausted communities equally over the rest."""
    counts = {c.community_id: 0 for c in others}
    capacity = {c.community_id: len(c.utterances) for c in others}
    active = [c.community_id for c in others if capacity[c.community_id] > 0]
    remaining = need
    while remaining > 0 and active:
        base, extra = divmod(remaining, len(active))
        still_active = []
        for i, tag in enumerate(active):
            quota = base + (1 if i < extra else 0)
            take = min(quota, capacity[tag])
            counts[tag] += take
            capacity[tag] -= take
            remaining -= take
            if capacity[tag] > 0:
                still_active.append(tag)
        active = still_active
    return counts


def build_training_set(
    target: CommunityCorpus,
    others: Sequence[CommunityCorpus],
    seed: int,
) -> TrainingSet:
    """Assemble a 1:1 training set for `target`.

    Positives are all target utterances. Negatives are drawn without
    replacement from the other communities' corpora, as equally as the
    corpora allow, using a deterministic RNG; the same seed reproduces the
    identical set.
    """
    if not target.utterances:
        raise ValueError("target corpus is empty")
    if not others:
        raise ValueError("need at least one other community to sample negatives from")
    for c in others:
        if c.community_id == target.community_id:
            raise ValueError(f"negative source {c.community_id!r} equals the target community")

    need = len(target.utterances)
    available = sum(len(c.utterances) for c in others)
    if available < need:
        raise InsufficientNegativesError(
            f"insufficient negatives: need {need}, other communities hold {available} "
            f"(short {need - available})"
        )

    counts = _negative_quotas(need, others)
    rng = np.random.default_rng(seed)
    negatives: list[tuple[Utterance, str]] = []
    for c in others:
        k = counts[c.community_id]
        if k == 0:
            continue
        picked = rng.choice(len(c.utterances), size=k, replace=False)
        negatives.extend((c.utterances[int(i)], c.community_id) for i in picked)

    return TrainingSet(
        community_id=target.community_id,
        positives=target.utterances,
        negatives=tuple(negatives),
        seed=seed,
    )
