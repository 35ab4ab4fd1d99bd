"""Command-line pipeline: train, calibrate, validate, audit, report.

Stages are composable over files so heavyweight external scorers can run
out-of-band and re-enter via score files. Every command is deterministic
given (config, inputs, seed); the seed must be explicit in the config so
audit results are reproducible. A fixed "timestamp" in the config pins the
report clock for byte-identical reruns.

Config is a single JSON file; see README for the schema. `--seed`, `--tau`
and `--out` override config values; the toxicity API key may come from the
TOXICITY_API_KEY environment variable instead of the config.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import bias, calibrate, clc, corpus, report, taboo
from .clc import fnv1a_64

log = logging.getLogger(__name__)

DEFAULT_TAU = 0.85
TOXICITY_KEY_ENV = "TOXICITY_API_KEY"


@dataclass(frozen=True)
class CommunitySpec:
    tag: str
    corpus_paths: tuple[Path, ...]
    train_months: frozenset[corpus.Month]
    val_months: frozenset[corpus.Month]


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    path: Path
    schema: taboo.DatasetSchema
    keep_label: str

    @property
    def column_label(self) -> str:
        return f"{self.name}-{self.keep_label}"


@dataclass
class RunConfig:
    seed: int
    out_dir: Path
    tau: float | None  # None means auto-calibrate
    target_coverage: float = 0.52
    grid_step: float = 0.05
    grid: tuple[float, ...] | None = None  # explicit threshold grid override
    decision_threshold: float = 0.5
    declared_only: bool = True
    bootstrap_replicates: int = 10_000
    features: clc.FeatureConfig = field(default_factory=clc.FeatureConfig)
    hyper: clc.TrainHyper = field(default_factory=clc.TrainHyper)
    communities: list[CommunitySpec] = field(default_factory=list)
    datasets: list[DatasetSpec] = field(default_factory=list)
    taboo_score_paths: list[Path] = field(default_factory=list)
    clc_score_path: Path | None = None
    toxicity: taboo.ToxicityClientConfig | None = None
    timestamp: str | None = None


class ConfigError(ValueError):
    pass


def _parse_month(text: str) -> corpus.Month:
    year, _, month = text.partition("-")
    return (int(year), int(month))


def _parse_months(items: Sequence[str]) -> frozenset[corpus.Month]:
    """Accepts "YYYY-MM" entries and inclusive "YYYY-MM..YYYY-MM" ranges."""
    months: set[corpus.Month] = set()
    for item in items:
        if ".." in item:
            lo, hi = (_parse_month(part) for part in item.split("..", 1))
            y, m = lo
            while (y, m) <= hi:
                months.add((y, m))
                m += 1
                if m > 12:
                    y, m = y + 1, 1
        else:
            months.add(_parse_month(item))
    return frozenset(months)


def _ranges(raw, default):
    if raw is None:
        return default
    return tuple(raw) if raw else None


def load_config(path: str | Path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None

    if "seed" not in data:
        raise ConfigError("config must set an explicit integer 'seed'")
    raw_tau = data.get("tau", DEFAULT_TAU)
    tau = None if raw_tau == "auto" else float(raw_tau)
    if tau is not None and not 0.0 < tau < 1.0:
        raise ConfigError(f"tau must lie in (0, 1), got {tau}")
    target_coverage = float(data.get("target_coverage", 0.52))
    if not 0.0 < target_coverage < 1.0:
        raise ConfigError(f"target_coverage must lie in (0, 1), got {target_coverage}")

    feats = data.get("features", {})
    cfg_features = clc.FeatureConfig(
        word_ngrams=_ranges(feats.get("word_ngrams"), (1, 2)),
        char_ngrams=_ranges(feats.get("char_ngrams"), (3, 5)),
        hash_dim=int(feats.get("hash_dim", 1 << 20)),
        hash_seed=int(feats.get("hash_seed", 0)),
    )
    hyp = data.get("hyper", {})
    cfg_hyper = clc.TrainHyper(
        epochs=int(hyp.get("epochs", 5)),
        learning_rate=float(hyp.get("learning_rate", 0.1)),
        l2=float(hyp.get("l2", 1e-6)),
    )

    communities = []
    for entry in data.get("communities", []):
        communities.append(
            CommunitySpec(
                tag=entry["tag"],
                corpus_paths=tuple(Path(p) for p in entry["corpus"]),
                train_months=_parse_months(entry.get("train_months", [])),
                val_months=_parse_months(entry.get("val_months", [])),
            )
        )
    tags = [c.tag for c in communities]
    if len(set(tags)) != len(tags):
        raise ConfigError(f"community tags must be unique, got {tags}")

    datasets = []
    for entry in data.get("taboo_datasets", []):
        datasets.append(
            DatasetSpec(
                name=entry["name"],
                path=Path(entry["path"]),
                schema=taboo.DatasetSchema(
                    text_column=entry["text_column"],
                    label_column=entry["label_column"],
                    id_column=entry.get("id_column"),
                ),
                keep_label=entry["keep_label"],
            )
        )

    tox = None
    if "toxicity" in data:
        t = data["toxicity"]
        api_key = t.get("api_key") or os.environ.get(TOXICITY_KEY_ENV, "")
        tox = taboo.ToxicityClientConfig(
            endpoint=t["endpoint"],
            api_key=api_key,
            requests_per_second=float(t.get("requests_per_second", 1.0)),
            max_retries=int(t.get("max_retries", 3)),
            timeout=float(t.get("timeout", 10.0)),
        )

    return RunConfig(
        seed=int(data["seed"]),
        out_dir=Path(data.get("out_dir", "out")),
        tau=tau,
        target_coverage=target_coverage,
        grid_step=float(data.get("grid_step", 0.05)),
        grid=tuple(float(g) for g in data["grid"]) if data.get("grid") else None,
        decision_threshold=float(data.get("decision_threshold", 0.5)),
        declared_only=bool(data.get("declared_only", True)),
        bootstrap_replicates=int(data.get("bootstrap_replicates", 10_000)),
        features=cfg_features,
        hyper=cfg_hyper,
        communities=communities,
        datasets=datasets,
        taboo_score_paths=[Path(p) for p in data.get("taboo_scores", [])],
        clc_score_path=Path(data["clc_scores"]) if data.get("clc_scores") else None,
        toxicity=tox,
        timestamp=data.get("timestamp"),
    )


def _derive_seed(master: int, *labels: str) -> int:
    return master ^ fnv1a_64("|".join(labels).encode("utf-8"))


def _model_path(cfg: RunConfig, tag: str) -> Path:
    return cfg.out_dir / "models" / f"{tag}.clc"


def _load_splits(cfg: RunConfig) -> dict[str, tuple[corpus.CommunityCorpus, corpus.CommunityCorpus]]:
    """Parse each community's corpora and split into train/validation."""
    splits = {}
    for spec in cfg.communities:
        merged: list[corpus.Utterance] = []
        for path in spec.corpus_paths:
            if not path.exists():
                raise FileNotFoundError(f"corpus file not found: {path}")
            with path.open("r", encoding="utf-8") as handle:
                parsed, _stats = corpus.parse_corpus(handle, spec.tag, source_name=path.name)
            merged.extend(parsed.utterances)
        full = corpus.CommunityCorpus(spec.tag, tuple(merged))
        train, val, _stats = corpus.split_by_month(
            full, set(spec.train_months), set(spec.val_months)
        )
        splits[spec.tag] = (train, val)
    return splits


def _load_models(cfg: RunConfig) -> dict[str, clc.ClcModel]:
    models = {}
    for spec in cfg.communities:
        path = _model_path(cfg, spec.tag)
        if not path.exists():
            raise FileNotFoundError(f"model file not found: {path} (run 'train' first)")
        models[spec.tag] = clc.load_model(path.read_bytes())
    return models


def _load_score_table(cfg: RunConfig) -> clc.ScoreTable | None:
    if cfg.clc_score_path is None:
        return None
    with cfg.clc_score_path.open("r", encoding="utf-8") as handle:
        return clc.import_scores(handle)


def _alignment_scores(
    tag: str,
    utterances: Sequence[corpus.Utterance],
    models: dict[str, clc.ClcModel] | None,
    table: clc.ScoreTable | None,
) -> list[float]:
    if table is not None:
        try:
            return [table.entries[u.id][tag] for u in utterances]
        except KeyError as exc:
            raise ValueError(f"imported score table missing {exc} for community {tag}") from None
    assert models is not None
    model = models[tag]
    return [clc.score(model, u.norm_text) for u in utterances]


def _resolve_tau(cfg: RunConfig) -> float:
    if cfg.tau is not None:
        return cfg.tau
    tau_file = cfg.out_dir / "tau.json"
    if tau_file.exists():
        return float(json.loads(tau_file.read_text())["tau"])
    return DEFAULT_TAU


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    print(f"wrote {path}")


# --- matrix JSON round-trip (artifacts consumed by `report`) ---------------

def _validation_to_json(m: calibrate.ValidationMatrix) -> str:
    return json.dumps(
        {
            "rows": list(m.row_tags),
            "cols": list(m.col_tags),
            "cells": m.cells.tolist(),
            "tau": m.tau,
        },
        indent=2,
    )


def _validation_from_json(text: str) -> calibrate.ValidationMatrix:
    data = json.loads(text)
    return calibrate.ValidationMatrix(
        row_tags=tuple(data["rows"]),
        col_tags=tuple(data["cols"]),
        cells=np.array(data["cells"]),
        tau=data["tau"],
    )


def _proportions_to_json(m: bias.ProportionMatrix) -> str:
    return json.dumps(
        {
            "rows": list(m.row_tags),
            "cols": list(m.col_labels),
            "cells": m.cells.tolist(),
            "col_means": m.col_means.tolist(),
            "col_sds": m.col_sds.tolist(),
            "flags": sorted(list(pair) for pair in m.flags),
            "tau": m.tau,
        },
        indent=2,
    )


def _proportions_from_json(text: str) -> bias.ProportionMatrix:
    data = json.loads(text)
    return bias.ProportionMatrix(
        row_tags=tuple(data["rows"]),
        col_labels=tuple(data["cols"]),
        cells=np.array(data["cells"]),
        col_means=np.array(data["col_means"]),
        col_sds=np.array(data["col_sds"]),
        flags=frozenset((row, col) for row, col in data["flags"]),
        tau=data["tau"],
    )


def _correlations_to_json(results: Sequence[bias.CorrelationResult]) -> str:
    return json.dumps([vars(r) for r in results], indent=2)


def _correlations_from_json(text: str) -> list[bias.CorrelationResult]:
    return [bias.CorrelationResult(**entry) for entry in json.loads(text)]


# --- subcommands ------------------------------------------------------------

def cmd_train(cfg: RunConfig) -> int:
    """Per community: split by month, build the 1:1 set, train, save."""
    if not cfg.communities:
        raise ConfigError("config lists no communities")
    splits = _load_splits(cfg)
    print("community\ttrain_size\tval_size")
    for spec in cfg.communities:
        train, val = splits[spec.tag]
        others = [splits[o.tag][0] for o in cfg.communities if o.tag != spec.tag]
        ts = corpus.build_training_set(train, others, seed=_derive_seed(cfg.seed, spec.tag))
        model = clc.train_clc(ts, cfg.features, cfg.hyper, seed=_derive_seed(cfg.seed, spec.tag))
        path = _model_path(cfg, spec.tag)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(clc.save_model(model))
        print(f"{spec.tag}\t{len(ts.positives) + len(ts.negatives)}\t{len(val)}")
        log.info("saved %s", path)
    return 0


def cmd_calibrate(cfg: RunConfig) -> int:
    """Survival curves per community; select tau unless fixed in config."""
    splits = _load_splits(cfg)
    table = _load_score_table(cfg)
    models = None if table is not None else _load_models(cfg)
    grid = cfg.grid if cfg.grid is not None else calibrate.default_grid(cfg.grid_step)

    curves = []
    for spec in cfg.communities:
        _train, val = splits[spec.tag]
        scores = _alignment_scores(spec.tag, val.utterances, models, table)
        curves.append(calibrate.compute_ccdf(scores, grid, community_id=spec.tag))
    _write(cfg.out_dir / "ccdf.csv", report.emit_ccdf_csv(curves))

    if cfg.tau is not None:
        tau, mode = cfg.tau, "fixed"
        print(f"calibration skipped; tau={tau:g} (fixed in config)")
    else:
        tau, mode = calibrate.select_threshold(curves, cfg.target_coverage), "auto"
        print(f"selected tau={tau:g} (coverage floor {cfg.target_coverage:g})")
    _write(
        cfg.out_dir / "tau.json",
        json.dumps(
            {"tau": tau, "mode": mode, "target_coverage": cfg.target_coverage}, indent=2
        ),
    )
    return 0


def cmd_validate(cfg: RunConfig) -> int:
    """Full cross matrix of high-alignment percentages."""
    splits = _load_splits(cfg)
    table = _load_score_table(cfg)
    models = None if table is not None else _load_models(cfg)
    tau = _resolve_tau(cfg)

    val_sets = [splits[spec.tag][1] for spec in cfg.communities]
    scorers = table if table is not None else [models[s.tag] for s in cfg.communities]
    matrix = calibrate.validation_matrix(scorers, val_sets, tau)

    _write(cfg.out_dir / "validation_matrix.tsv", report.render_matrix(matrix, "tsv"))
    _write(cfg.out_dir / "validation_matrix.md", report.render_matrix(matrix, "markdown"))
    _write(cfg.out_dir / "validation_matrix.json", _validation_to_json(matrix))
    return 0


def _read_taboo_scores(paths: Sequence[Path]) -> dict[str, dict[str, float]]:
    """Merge score files into {classifier_tag: {utterance_id: score}}."""
    per_classifier: dict[str, dict[str, float]] = {}
    for path in paths:
        with path.open("r", encoding="utf-8") as handle:
            table = clc.import_scores(handle)
        for uid, per_tag in table.entries.items():
            for tag, value in per_tag.items():
                per_classifier.setdefault(tag, {})[uid] = value
    return per_classifier


def cmd_audit_classifier(cfg: RunConfig) -> int:
    """One correlation per (taboo classifier, community) over val sets."""
    if not cfg.taboo_score_paths:
        raise ConfigError("config lists no taboo_scores files to audit")
    splits = _load_splits(cfg)
    table = _load_score_table(cfg)
    models = None if table is not None else _load_models(cfg)
    taboo_scores = _read_taboo_scores(cfg.taboo_score_paths)

    results = []
    failures = []
    for clf_tag in sorted(taboo_scores):
        per_id = taboo_scores[clf_tag]
        for spec in cfg.communities:
            _train, val = splits[spec.tag]
            covered = [u for u in val.utterances if u.id in per_id]
            alignments = _alignment_scores(spec.tag, covered, models, table)
            pairs = [
                (per_id[u.id],
                 per_id[u.id] >= cfg.decision_threshold if cfg.declared_only else True)
                for u in covered
            ]
            try:
                results.append(
                    bias.classifier_bias(
                        pairs,
                        alignments,
                        B=cfg.bootstrap_replicates,
                        seed=_derive_seed(cfg.seed, clf_tag, spec.tag),
                        classifier_tag=clf_tag,
                        community_tag=spec.tag,
                    )
                )
            except (bias.NoTabooDeclaredError, bias.DegenerateCorrelationError) as exc:
                failures.append(f"{clf_tag}/{spec.tag}: {exc}")
                log.warning("skipped %s/%s: %s", clf_tag, spec.tag, exc)

    _write(cfg.out_dir / "correlations.csv", report.emit_correlations_csv(results))
    _write(cfg.out_dir / "correlations.json", _correlations_to_json(results))
    for line in failures:
        print(f"skipped: {line}", file=sys.stderr)
    return 0


def cmd_audit_dataset(cfg: RunConfig) -> int:
    """Proportion matrix over taboo test sets plus reset flags."""
    if not cfg.datasets:
        raise ConfigError("config lists no taboo_datasets to audit")
    table = _load_score_table(cfg)
    models = None if table is not None else _load_models(cfg)
    tau = _resolve_tau(cfg)
    tags = [spec.tag for spec in cfg.communities]

    columns = []
    all_instances: list[taboo.TabooInstance] = []
    alignments: dict[str, dict[str, float]] = {}
    for ds in cfg.datasets:
        if not ds.path.exists():
            raise FileNotFoundError(f"dataset file not found: {ds.path}")
        with ds.path.open("r", encoding="utf-8") as handle:
            dataset, _stats = taboo.parse_taboo_dataset(
                handle, ds.schema, ds.keep_label, name=ds.name
            )
        per_tag: dict[str, list[float]] = {}
        for tag in tags:
            if table is not None:
                scores = [table.entries[i.id][tag] for i in dataset.instances]
            else:
                model = models[tag]
                scores = [clc.score(model, i.norm_text) for i in dataset.instances]
            per_tag[tag] = scores
            for inst, value in zip(dataset.instances, scores):
                alignments.setdefault(inst.id, {})[tag] = value
        columns.append((ds.column_label, per_tag))
        all_instances.extend(dataset.instances)

    matrix = bias.dataset_bias_matrix(columns, tau)
    flags = bias.flag_for_reset(all_instances, alignments, tau)

    _write(cfg.out_dir / "proportions.tsv", report.render_matrix(matrix, "tsv"))
    _write(cfg.out_dir / "proportions.md", report.render_matrix(matrix, "markdown"))
    _write(cfg.out_dir / "proportions.json", _proportions_to_json(matrix))
    _write(cfg.out_dir / "reset_flags.csv", report.emit_reset_flags_csv(flags))
    return 0


def _input_paths(cfg: RunConfig) -> list[Path]:
    paths: list[Path] = []
    for spec in cfg.communities:
        paths.extend(spec.corpus_paths)
    paths.extend(ds.path for ds in cfg.datasets)
    paths.extend(cfg.taboo_score_paths)
    if cfg.clc_score_path:
        paths.append(cfg.clc_score_path)
    return [p for p in paths if p.exists()]


def cmd_report(cfg: RunConfig) -> int:
    """Consolidate the out-directory artifacts into one Markdown report."""
    out = cfg.out_dir

    def maybe(path: Path, loader):
        return loader(path.read_text(encoding="utf-8")) if path.exists() else None

    validation = maybe(out / "validation_matrix.json", _validation_from_json)
    proportions = maybe(out / "proportions.json", _proportions_from_json)
    correlations = maybe(out / "correlations.json", _correlations_from_json) or []

    reset_flags = []
    flags_path = out / "reset_flags.csv"
    if flags_path.exists():
        with flags_path.open("r", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            next(reader, None)
            reset_flags = [
                bias.ResetFlag(instance_id=row[0], community_tag=row[1], alignment=float(row[2]))
                for row in reader
                if row
            ]

    clock = (lambda: cfg.timestamp) if cfg.timestamp else None
    _audit, text = report.build_report(
        seed=cfg.seed,
        tau=_resolve_tau(cfg),
        decision_threshold=cfg.decision_threshold,
        input_paths=_input_paths(cfg),
        validation=validation,
        correlations=correlations,
        proportions=proportions,
        reset_flags=reset_flags,
        clock=clock,
    )
    _write(out / "report.md", text)
    return 0


COMMANDS = {
    "train": cmd_train,
    "calibrate": cmd_calibrate,
    "validate": cmd_validate,
    "audit-classifier": cmd_audit_classifier,
    "audit-dataset": cmd_audit_dataset,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clcaudit",
        description="Train community-language classifiers and audit taboo "
        "classifiers/datasets for community bias.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, handler in COMMANDS.items():
        p = sub.add_parser(name, help=handler.__doc__)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--tau", type=float, help="override the high-alignment threshold")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.tau is not None:
            cfg.tau = args.tau
        if args.out is not None:
            cfg.out_dir = Path(args.out)
        return COMMANDS[args.command](cfg)
    except (
        ConfigError,
        FileNotFoundError,
        OSError,
        ValueError,
        clc.UnreadableModelError,
        taboo.ToxicityAuthError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
