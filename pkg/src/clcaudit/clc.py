"""Community-language classifiers over hashed n-gram features.

A classifier is a logistic model on feature-hashed word and character
n-grams of normalized text. Its confidence that a text belongs to the
community is the text's alignment score in [0, 1]. Externally computed
alignment scores can be imported from CSV instead of training a model here.

Hashing is seeded 64-bit FNV-1a reduced modulo the (power-of-two) table
size, so feature indices are identical across platforms and runs.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import struct
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .corpus import TrainingSet

log = logging.getLogger(__name__)

_U64 = 0xFFFFFFFFFFFFFFFF
_FNV64_OFFSET = 0xCBF29CE484222325
_FNV64_PRIME = 0x100000001B3

_MODEL_MAGIC = b"CLCM"
MODEL_FORMAT_VERSION = 1


class TrainingDivergedError(ArithmeticError):
    """Raised when SGD produces a non-finite loss or weights."""


class UnreadableModelError(ValueError):
    """Raised for truncated, corrupt or wrong-version model blobs."""


def fnv1a_64(data: bytes, seed: int = 0) -> int:
    """Seeded 64-bit FNV-1a hash (seed XORed into the offset basis)."""
    h = _FNV64_OFFSET ^ (seed & _U64)
    for b in data:
        h ^= b
        h = (h * _FNV64_PRIME) & _U64
    return h


def stable_hash(ngram: str, seed: int = 0) -> int:
    return fnv1a_64(ngram.encode("utf-8"), seed)


@dataclass(frozen=True)
class FeatureConfig:
    """Hashed n-gram feature space. A range of None disables that family."""

    word_ngrams: tuple[int, int] | None = (1, 2)
    char_ngrams: tuple[int, int] | None = (3, 5)
    hash_dim: int = 1 << 20
    hash_seed: int = 0

    def __post_init__(self) -> None:
        if self.hash_dim < (1 << 10) or self.hash_dim & (self.hash_dim - 1):
            raise ValueError(f"hash_dim must be a power of two >= 1024, got {self.hash_dim}")
        for name, rng in (("word_ngrams", self.word_ngrams), ("char_ngrams", self.char_ngrams)):
            if rng is None:
                continue
            lo, hi = rng
            if lo < 1 or lo > hi:
                raise ValueError(f"{name} range must satisfy 1 <= low <= high, got {rng}")
        if self.word_ngrams is None and self.char_ngrams is None:
            raise ValueError("at least one n-gram family must be enabled")


@dataclass(frozen=True)
class TrainHyper:
    epochs: int = 5
    learning_rate: float = 0.1
    l2: float = 1e-6


@dataclass(frozen=True)
class TrainMeta:
    seed: int
    epochs: int
    learning_rate: float
    l2: float
    train_size: int


@dataclass(eq=False)
class ClcModel:
    """A trained community classifier: dense hashed weights plus bias."""

    community_id: str
    feature_config: FeatureConfig
    weights: np.ndarray
    bias: float
    train_meta: TrainMeta

    def __post_init__(self) -> None:
        if len(self.weights) != self.feature_config.hash_dim:
            raise ValueError("weights length must equal hash_dim")


@dataclass
class ScoreTable:
    """Imported alignment scores: utterance id -> community tag -> score."""

    entries: dict[str, dict[str, float]] = field(default_factory=dict)
    duplicates: int = 0
    rejected: int = 0

    def community_tags(self) -> list[str]:
        tags: set[str] = set()
        for per_tag in self.entries.values():
            tags.update(per_tag)
        return sorted(tags)


def extract_features(norm_text: str, cfg: FeatureConfig) -> dict[int, int]:
    """Hashed n-gram counts for normalized text.

    Word n-grams run over whitespace tokens; character n-grams stay within
    word boundaries. Empty text yields an empty vector.
    """
    feats: dict[int, int] = {}
    if not norm_text:
        return feats
    tokens = norm_text.split()
    mask = cfg.hash_dim - 1
    seed = cfg.hash_seed

    if cfg.word_ngrams is not None:
        lo, hi = cfg.word_ngrams
        n_tokens = len(tokens)
        for n in range(lo, min(hi, n_tokens) + 1):
            for i in range(n_tokens - n + 1):
                gram = tokens[i] if n == 1 else " ".join(tokens[i : i + n])
                idx = stable_hash(gram, seed) & mask
                feats[idx] = feats.get(idx, 0) + 1

    if cfg.char_ngrams is not None:
        lo, hi = cfg.char_ngrams
        for tok in tokens:
            length = len(tok)
            for n in range(lo, min(hi, length) + 1):
                for i in range(length - n + 1):
                    idx = stable_hash(tok[i : i + n], seed) & mask
                    feats[idx] = feats.get(idx, 0) + 1

    return feats


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def _log1pexp(z: float) -> float:
    """log(1 + e^z), stable for large |z|; propagates NaN silently."""
    if z > 0:
        return z + math.log1p(math.exp(-z))
    return math.log1p(math.exp(z))


def _as_arrays(feats: dict[int, int]) -> tuple[np.ndarray, np.ndarray]:
    idx = np.fromiter(feats.keys(), dtype=np.int64, count=len(feats))
    cnt = np.fromiter(feats.values(), dtype=np.float64, count=len(feats))
    return idx, cnt


def train_clc(
    ts: TrainingSet,
    cfg: FeatureConfig,
    hyper: TrainHyper = TrainHyper(),
    seed: int = 0,
) -> ClcModel:
    """Train a logistic classifier by SGD on the 1:1 training set.

    Per-example update: w <- w - lr*((sigmoid(w.x + b) - y)*x + l2*w), with
    the label y = 1 for community texts. Examples are reshuffled every epoch
    by an RNG seeded from `seed`, and the learning rate decays as
    lr/sqrt(epoch). The result is fully determined by (inputs, seed).
    """
    if not ts.positives or not ts.negatives:
        raise ValueError("training set must contain positives and negatives")
    if len(ts.positives) != len(ts.negatives):
        raise ValueError(
            f"training set is not 1:1 balanced "
            f"({len(ts.positives)} positives vs {len(ts.negatives)} negatives)"
        )

    examples = [(u.norm_text, 1.0) for u in ts.positives]
    examples += [(u.norm_text, 0.0) for u, _origin in ts.negatives]
    feats = [_as_arrays(extract_features(text, cfg)) for text, _y in examples]
    labels = np.array([y for _text, y in examples])
    n = len(examples)

    # L2 decay is folded into a running scale so each update stays sparse:
    # weights = scale * raw at all times.
    raw = np.zeros(cfg.hash_dim, dtype=np.float64)
    scale = 1.0
    bias = 0.0
    shuffle_rng = np.random.default_rng(seed)

    for epoch in range(1, hyper.epochs + 1):
        lr = hyper.learning_rate / math.sqrt(epoch)
        decay = 1.0 - lr * hyper.l2
        order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        for i in order:
            idx, cnt = feats[i]
            z = scale * float(raw[idx] @ cnt) + bias if len(idx) else bias
            y = labels[i]
            grad = _sigmoid(z) - y
            loss_sum += _log1pexp(-z) if y == 1.0 else _log1pexp(z)
            scale *= decay
            if len(idx):
                raw[idx] -= (lr * grad / scale) * cnt
            bias -= lr * grad
        if not (math.isfinite(loss_sum) and math.isfinite(scale) and math.isfinite(bias)):
            raise TrainingDivergedError(f"training diverged at epoch {epoch}")

    weights = scale * raw
    if not np.isfinite(weights).all():
        raise TrainingDivergedError(f"training diverged at epoch {hyper.epochs}")

    return ClcModel(
        community_id=ts.community_id,
        feature_config=cfg,
        weights=weights,
        bias=float(bias),
        train_meta=TrainMeta(
            seed=seed,
            epochs=hyper.epochs,
            learning_rate=hyper.learning_rate,
            l2=hyper.l2,
            train_size=n,
        ),
    )


def score(model: ClcModel, norm_text: str) -> float:
    """Alignment score sigmoid(w.x + b) in [0, 1]. Pure function."""
    feats = extract_features(norm_text, model.feature_config)
    z = model.bias
    if feats:
        idx, cnt = _as_arrays(feats)
        z += float(model.weights[idx] @ cnt)
    return _sigmoid(z)


def save_model(model: ClcModel) -> bytes:
    """Serialize to a self-describing, version-tagged binary blob."""
    cfg = model.feature_config
    header = json.dumps(
        {
            "community_id": model.community_id,
            "feature_config": {
                "word_ngrams": list(cfg.word_ngrams) if cfg.word_ngrams else None,
                "char_ngrams": list(cfg.char_ngrams) if cfg.char_ngrams else None,
                "hash_dim": cfg.hash_dim,
                "hash_seed": cfg.hash_seed,
            },
            "bias": model.bias,
            "train_meta": {
                "seed": model.train_meta.seed,
                "epochs": model.train_meta.epochs,
                "learning_rate": model.train_meta.learning_rate,
                "l2": model.train_meta.l2,
                "train_size": model.train_meta.train_size,
            },
            "n_weights": len(model.weights),
        },
        sort_keys=True,
    ).encode("utf-8")
    return (
        _MODEL_MAGIC
        + struct.pack("<HI", MODEL_FORMAT_VERSION, len(header))
        + header
        + np.ascontiguousarray(model.weights, dtype="<f8").tobytes()
    )


def load_model(blob: bytes) -> ClcModel:
    """Inverse of save_model; round-trips scores exactly."""
    prefix = len(_MODEL_MAGIC) + struct.calcsize("<HI")
    if len(blob) < prefix:
        raise UnreadableModelError("unreadable model: truncated header")
    if blob[:4] != _MODEL_MAGIC:
        raise UnreadableModelError("unreadable model: bad magic")
    version, header_len = struct.unpack("<HI", blob[4:prefix])
    if version != MODEL_FORMAT_VERSION:
        raise UnreadableModelError(f"unreadable model: unsupported format version {version}")
    if len(blob) < prefix + header_len:
        raise UnreadableModelError("unreadable model: truncated header")
    try:
        header = json.loads(blob[prefix : prefix + header_len])
        fc = header["feature_config"]
        cfg = FeatureConfig(
            word_ngrams=tuple(fc["word_ngrams"]) if fc["word_ngrams"] else None,
            char_ngrams=tuple(fc["char_ngrams"]) if fc["char_ngrams"] else None,
            hash_dim=fc["hash_dim"],
            hash_seed=fc["hash_seed"],
        )
        meta = TrainMeta(**header["train_meta"])
        n_weights = header["n_weights"]
        bias = float(header["bias"])
        community_id = header["community_id"]
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise UnreadableModelError(f"unreadable model: bad header ({exc})") from exc

    body = blob[prefix + header_len :]
    expected = n_weights * 8
    if len(body) != expected:
        raise UnreadableModelError(
            f"unreadable model: weight payload is {len(body)} bytes, expected {expected}"
        )
    weights = np.frombuffer(body, dtype="<f8").astype(np.float64)
    return ClcModel(
        community_id=community_id,
        feature_config=cfg,
        weights=weights,
        bias=bias,
        train_meta=meta,
    )


def import_scores(stream: Iterable[str]) -> ScoreTable:
    """Parse header-less CSV lines `id,community_tag,score`.

    Scores outside [0, 1] and unparseable lines are rejected and counted;
    a duplicate (id, tag) pair keeps the last value and counts a warning.
    """
    table = ScoreTable()
    for row in csv.reader(stream):
        if not row:
            continue
        if len(row) != 3:
            table.rejected += 1
            continue
        uid, tag, raw = (cell.strip() for cell in row)
        try:
            value = float(raw)
        except ValueError:
            table.rejected += 1
            continue
        if not (uid and tag and 0.0 <= value <= 1.0):
            table.rejected += 1
            continue
        per_tag = table.entries.setdefault(uid, {})
        if tag in per_tag:
            table.duplicates += 1
        per_tag[tag] = value
    if table.rejected or table.duplicates:
        log.warning(
            "score import: %d rejected records, %d duplicate (id, tag) pairs",
            table.rejected, table.duplicates,
        )
    return table
