"""Shared builders for synthetic two-community worlds.

The two communities use disjoint alphabets (a-m vs n-z) so their word AND
character n-grams never overlap, which makes separability a property of the
construction rather than of tuning.
"""

from __future__ import annotations

import json
import string
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pytest

LETTERS_A = string.ascii_lowercase[:13]
LETTERS_B = string.ascii_lowercase[13:]


def make_vocab(letters: str, n_words: int, rng: np.random.Generator, word_len: int = 6):
    pool = list(letters)
    words: set[str] = set()
    while len(words) < n_words:
        words.add("".join(rng.choice(pool, size=word_len)))
    return sorted(words)


def month_timestamp(year: int, month: int, i: int) -> int:
    base = datetime(year, month, 3, 12, 0, 0, tzinfo=timezone.utc)
    return int(base.timestamp()) + i


def write_corpus_jsonl(
    path: Path,
    tag: str,
    vocab: list[str],
    rng: np.random.Generator,
    *,
    per_train_month: int,
    val_count: int,
    words_per_text: int = 8,
    year: int = 2018,
) -> None:
    """Eleven training months plus one validation month of synthetic comments."""
    with path.open("w", encoding="utf-8") as handle:
        n = 0
        for month in range(1, 12):
            for i in range(per_train_month):
                record = {
                    "body": " ".join(rng.choice(vocab, size=words_per_text)),
                    "subreddit": tag,
                    "created_utc": month_timestamp(year, month, i),
                    "id": f"{tag}-{n}",
                }
                handle.write(json.dumps(record) + "\n")
                n += 1
        for i in range(val_count):
            record = {
                "body": " ".join(rng.choice(vocab, size=words_per_text)),
                "subreddit": tag,
                "created_utc": month_timestamp(year, 12, i),
                "id": f"{tag}-{n}",
            }
            handle.write(json.dumps(record) + "\n")
            n += 1


def write_taboo_tsv(path: Path, rows: list[tuple[str, str, str]]) -> None:
    with path.open("w", encoding="utf-8") as handle:
        handle.write("id\ttweet\tsubtask_a\n")
        for uid, text, label in rows:
            handle.write(f"{uid}\t{text}\t{label}\n")


class SynthWorld:
    """Paths plus config for a two-community pipeline run."""

    def __init__(self, root: Path, *, per_train_month=12, val_count=24, seed=20260801):
        self.root = root
        rng = np.random.default_rng(seed)
        self.vocab = {
            "AL": make_vocab(LETTERS_A, 120, rng),
            "BR": make_vocab(LETTERS_B, 120, rng),
        }
        self.rng = rng
        for tag, fname in (("AL", "alpha.jsonl"), ("BR", "bravo.jsonl")):
            write_corpus_jsonl(
                root / fname, tag, self.vocab[tag], rng,
                per_train_month=per_train_month, val_count=val_count,
            )

        taboo_rows = []
        for i in range(30):
            words = self.vocab["AL"] if i % 2 == 0 else self.vocab["BR"]
            taboo_rows.append((f"t{i}", " ".join(rng.choice(words, size=8)), "OFF"))
        taboo_rows.append(("tneg", "completely 0utside 4ll vocabularies", "NOT"))
        write_taboo_tsv(root / "toy.tsv", taboo_rows)

        self.config = {
            "seed": 424242,
            "out_dir": str(root / "out"),
            "tau": 0.85,
            "decision_threshold": 0.5,
            "timestamp": "2026-01-01T00:00:00+00:00",
            "features": {"hash_dim": 65536},
            "hyper": {"epochs": 3},
            "communities": [
                {
                    "tag": "AL",
                    "corpus": [str(root / "alpha.jsonl")],
                    "train_months": ["2018-01..2018-11"],
                    "val_months": ["2018-12"],
                },
                {
                    "tag": "BR",
                    "corpus": [str(root / "bravo.jsonl")],
                    "train_months": ["2018-01..2018-11"],
                    "val_months": ["2018-12"],
                },
            ],
            "taboo_datasets": [
                {
                    "name": "Toy",
                    "path": str(root / "toy.tsv"),
                    "text_column": "tweet",
                    "label_column": "subtask_a",
                    "id_column": "id",
                    "keep_label": "OFF",
                },
            ],
        }
        self.config_path = root / "config.json"
        self.write_config()

    def write_config(self, **overrides):
        cfg = dict(self.config)
        cfg.update(overrides)
        self.config_path.write_text(json.dumps(cfg, indent=2))
        return self.config_path

    @property
    def out(self) -> Path:
        return Path(self.config["out_dir"])


@pytest.fixture(scope="session")
def world(tmp_path_factory):
    from clcaudit import cli

    w = SynthWorld(tmp_path_factory.mktemp("world"))
    assert cli.main(["train", "--config", str(w.config_path)]) == 0
    return w
