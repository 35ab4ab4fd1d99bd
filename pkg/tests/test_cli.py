import csv
import hashlib
import json

import numpy as np
import pytest

from clcaudit import cli
from clcaudit.clc import load_model, score
from clcaudit.corpus import parse_corpus, split_by_month

from conftest import SynthWorld


def run(world, command, **config_overrides):
    world.write_config(**config_overrides)
    return cli.main([command, "--config", str(world.config_path)])


class TestConfig:
    def test_month_range_parsing(self):
        months = cli._parse_months(["2018-01..2018-03", "2019-12"])
        assert months == frozenset({(2018, 1), (2018, 2), (2018, 3), (2019, 12)})

    def test_year_spanning_range(self):
        months = cli._parse_months(["2018-11..2019-02"])
        assert months == frozenset({(2018, 11), (2018, 12), (2019, 1), (2019, 2)})

    def test_missing_seed_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"communities": []}))
        with pytest.raises(cli.ConfigError, match="seed"):
            cli.load_config(path)

    def test_duplicate_tags_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(
            json.dumps(
                {
                    "seed": 1,
                    "communities": [
                        {"tag": "A", "corpus": [], "train_months": [], "val_months": []},
                        {"tag": "A", "corpus": [], "train_months": [], "val_months": []},
                    ],
                }
            )
        )
        with pytest.raises(cli.ConfigError, match="unique"):
            cli.load_config(path)

    def test_bad_tau_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"seed": 1, "tau": 1.5}))
        with pytest.raises(cli.ConfigError, match="tau"):
            cli.load_config(path)

    def test_config_not_found_exit_code(self, capsys):
        assert cli.main(["train", "--config", "/nonexistent/config.json"]) == 2
        assert "config" in capsys.readouterr().err

    def test_toxicity_api_key_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("TOXICITY_API_KEY", "from-env")
        path = tmp_path / "c.json"
        path.write_text(
            json.dumps(
                {"seed": 1, "toxicity": {"endpoint": "https://api.example/analyze"}}
            )
        )
        cfg = cli.load_config(path)
        assert cfg.toxicity.api_key == "from-env"
        assert cfg.toxicity.requests_per_second == 1.0


class TestTrain:
    def test_models_written(self, world):
        for tag in ("AL", "BR"):
            assert (world.out / "models" / f"{tag}.clc").exists()

    def test_prints_sizes_table(self, world, capsys):
        world.write_config(out_dir=str(world.root / "out2"))
        assert cli.main(["train", "--config", str(world.config_path)]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0].split("\t") == ["community", "train_size", "val_size"]
        rows = {line.split("\t")[0]: line.split("\t")[1:] for line in lines[1:]}
        # 11 months x 12 comments positives, doubled by 1:1 negatives
        assert rows["AL"] == ["264", "24"]
        assert rows["BR"] == ["264", "24"]
        world.write_config()

    def test_missing_corpus_exits_nonzero_naming_path(self, tmp_path, capsys):
        world = SynthWorld(tmp_path, per_train_month=2, val_count=2)
        world.config["communities"][0]["corpus"] = [str(tmp_path / "gone.jsonl")]
        world.write_config(communities=world.config["communities"])
        assert cli.main(["train", "--config", str(world.config_path)]) == 2
        assert "gone.jsonl" in capsys.readouterr().err

    def test_rerun_same_seed_identical_model_digests(self, world):
        digest_before = {
            tag: hashlib.sha256((world.out / "models" / f"{tag}.clc").read_bytes()).hexdigest()
            for tag in ("AL", "BR")
        }
        assert run(world, "train") == 0
        digest_after = {
            tag: hashlib.sha256((world.out / "models" / f"{tag}.clc").read_bytes()).hexdigest()
            for tag in ("AL", "BR")
        }
        assert digest_before == digest_after

    def test_seed_override_changes_models(self, world, tmp_path):
        out_alt = tmp_path / "alt"
        world.write_config(out_dir=str(out_alt))
        assert cli.main(
            ["train", "--config", str(world.config_path), "--seed", "7"]
        ) == 0
        world.write_config()
        a = (world.out / "models" / "AL.clc").read_bytes()
        b = (out_alt / "models" / "AL.clc").read_bytes()
        assert a != b


class TestCalibrate:
    def test_fixed_tau_skips_selection(self, world, capsys):
        assert run(world, "calibrate") == 0
        out = capsys.readouterr().out
        assert "calibration skipped" in out
        assert "tau=0.85" in out
        tau = json.loads((world.out / "tau.json").read_text())
        assert tau == {"tau": 0.85, "mode": "fixed", "target_coverage": 0.52}
        assert (world.out / "ccdf.csv").exists()

    def test_auto_mode_matches_brute_force_scan(self, world):
        assert run(world, "calibrate", tau="auto", target_coverage=0.52) == 0
        tau = json.loads((world.out / "tau.json").read_text())["tau"]

        # brute force over the emitted curves
        survival: dict[float, list[float]] = {}
        with (world.out / "ccdf.csv").open() as handle:
            reader = csv.DictReader(handle)
            for row in reader:
                survival.setdefault(float(row["threshold"]), []).append(
                    float(row["survival"])
                )
        feasible = [t for t, ss in survival.items() if min(ss) >= 0.52]
        assert tau == max(feasible)
        run(world, "calibrate")  # restore fixed-tau artifacts

    def test_coverage_unattainable_exit_nonzero(self, world, capsys):
        # untrained (0-epoch) models score everything 0.5, so no grid point
        # above 0.5 can keep 52% coverage
        overrides = dict(
            tau="auto", grid=[0.6, 0.9], target_coverage=0.52,
            hyper={"epochs": 0}, out_dir=str(world.root / "flat"),
        )
        assert run(world, "train", **overrides) == 0
        code = run(world, "calibrate", **overrides)
        world.write_config()
        assert code == 2
        err = capsys.readouterr().err
        assert "coverage unattainable" in err
        assert "best achievable" in err

    def test_ccdf_survival_non_increasing(self, world):
        assert run(world, "calibrate") == 0
        by_tag: dict[str, list[tuple[float, float]]] = {}
        with (world.out / "ccdf.csv").open() as handle:
            for row in csv.DictReader(handle):
                by_tag.setdefault(row["community"], []).append(
                    (float(row["threshold"]), float(row["survival"]))
                )
        for rows in by_tag.values():
            rows.sort()
            values = [s for _t, s in rows]
            assert all(a >= b for a, b in zip(values, values[1:]))


class TestValidate:
    def test_outputs_and_separation(self, world):
        assert run(world, "validate") == 0
        text = (world.out / "validation_matrix.tsv").read_text()
        lines = [line.split("\t") for line in text.strip().splitlines()]
        assert lines[0] == ["CLC", "AL", "BR"]
        cells = np.array([[float(v) for v in row[1:]] for row in lines[1:]])
        assert cells[0, 0] >= 90.0 and cells[1, 1] >= 90.0
        assert cells[0, 1] <= 10.0 and cells[1, 0] <= 10.0
        assert (world.out / "validation_matrix.md").exists()
        assert (world.out / "validation_matrix.json").exists()

    def test_validate_from_imported_score_table(self, world, tmp_path):
        # cover the external-score path: constant 0.9 for every val id
        ids = []
        for spec in ("alpha.jsonl", "bravo.jsonl"):
            with (world.root / spec).open() as handle:
                tag = "AL" if "alpha" in spec else "BR"
                corpus, _ = parse_corpus(handle, tag, source_name=spec)
            _train, val, _ = split_by_month(
                corpus, {(2018, m) for m in range(1, 12)}, {(2018, 12)}
            )
            ids.extend(u.id for u in val.utterances)
        score_file = tmp_path / "clc_scores.csv"
        score_file.write_text(
            "".join(f"{uid},{tag},0.9\n" for uid in ids for tag in ("AL", "BR"))
        )
        code = run(
            world, "validate",
            clc_scores=str(score_file), out_dir=str(world.root / "imported"),
        )
        world.write_config()
        assert code == 0
        text = (world.root / "imported" / "validation_matrix.tsv").read_text()
        body = [line.split("\t") for line in text.strip().splitlines()][1:]
        assert all(cell == "100.0" for row in body for cell in row[1:])


def _val_alignments(world):
    """Trained-model alignment of each community's own validation set."""
    result = {}
    for fname, tag in (("alpha.jsonl", "AL"), ("bravo.jsonl", "BR")):
        with (world.root / fname).open() as handle:
            corpus, _ = parse_corpus(handle, tag, source_name=fname)
        _train, val, _ = split_by_month(
            corpus, {(2018, m) for m in range(1, 12)}, {(2018, 12)}
        )
        model = load_model((world.out / "models" / f"{tag}.clc").read_bytes())
        result[tag] = [(u.id, score(model, u.norm_text)) for u in val.utterances]
    return result


class TestAuditClassifier:
    @pytest.fixture()
    def score_file(self, world, tmp_path):
        alignments = _val_alignments(world)
        path = tmp_path / "taboo_scores.csv"
        with path.open("w") as handle:
            for per_tag in alignments.values():
                for uid, align in per_tag:
                    # NORM tracks community norms (anti-correlated, all >= 0.5
                    # so the declared-only filter keeps every pair); BIAS is
                    # positively coupled to alignment
                    handle.write(f"{uid},NORM,{0.98 - 0.4 * align:.6f}\n")
                    handle.write(f"{uid},BIAS,{0.5 + 0.4 * align:.6f}\n")
                    handle.write(f"{uid},QUIET,0.05\n")
        return path

    def test_rows_and_directions(self, world, score_file, capsys):
        code = run(
            world, "audit-classifier",
            taboo_scores=[str(score_file)], bootstrap_replicates=400,
        )
        world.write_config()
        assert code == 0
        err = capsys.readouterr().err
        assert "QUIET" in err  # no declared instances -> row skipped, run continues

        rows = {}
        with (world.out / "correlations.csv").open() as handle:
            for row in csv.DictReader(handle):
                rows[(row["classifier"], row["community"])] = float(row["r"])
        assert set(rows) == {("NORM", "AL"), ("NORM", "BR"), ("BIAS", "AL"), ("BIAS", "BR")}
        assert rows[("NORM", "AL")] < -0.9 and rows[("NORM", "BR")] < -0.9
        assert rows[("BIAS", "AL")] > 0.9 and rows[("BIAS", "BR")] > 0.9

    def test_rerun_same_seed_identical_csv(self, world, score_file):
        overrides = dict(taboo_scores=[str(score_file)], bootstrap_replicates=400)
        assert run(world, "audit-classifier", **overrides) == 0
        first = (world.out / "correlations.csv").read_bytes()
        assert run(world, "audit-classifier", **overrides) == 0
        world.write_config()
        assert (world.out / "correlations.csv").read_bytes() == first

    def test_no_score_files_is_config_error(self, world, capsys):
        assert run(world, "audit-classifier") == 2
        world.write_config()
        assert "taboo_scores" in capsys.readouterr().err


class TestAuditDataset:
    def test_matrix_flags_and_reset_file(self, world):
        assert run(world, "audit-dataset") == 0
        text = (world.out / "proportions.tsv").read_text()
        lines = [line.split("\t") for line in text.strip().splitlines()]
        assert lines[0] == ["CLC", "Toy-OFF"]
        assert [row[0] for row in lines[1:]] == ["AL", "BR", "Average", "Std. Dev."]

        with (world.out / "reset_flags.csv").open() as handle:
            flags = list(csv.DictReader(handle))
        # toy.tsv alternates AL-vocab and BR-vocab texts, all labeled OFF
        assert len(flags) == 30
        assert {f["community"] for f in flags} == {"AL", "BR"}
        assert all(float(f["alignment"]) >= 0.85 for f in flags)

    def test_single_community_config_errors(self, world, capsys):
        # fails inside the matrix step (SD undefined), before any file is written
        code = run(world, "audit-dataset", communities=[world.config["communities"][0]])
        world.write_config()
        assert code == 2
        assert "2 communities" in capsys.readouterr().err

    def test_published_reference_columns_via_score_fixtures(self, tmp_path):
        # feed known one-decimal proportion columns through the command:
        # per column, a 1000-row test set whose per-community scores are
        # crafted to land exactly on the target cell percentages
        from test_acceptance import REFERENCE_COLUMNS, TAGS

        datasets = []
        score_lines = []
        for label, cells, _mean, _sd, _bold in REFERENCE_COLUMNS:
            name, _, keep = label.rpartition("-")
            path = tmp_path / f"{label}.tsv"
            with path.open("w") as handle:
                handle.write("id\ttext\tlabel\n")
                for i in range(1000):
                    handle.write(f"{label}:{i}\tsome text {i}\t{keep}\n")
            datasets.append(
                {
                    "name": name, "path": str(path), "text_column": "text",
                    "label_column": "label", "id_column": "id", "keep_label": keep,
                }
            )
            for tag, cell in zip(TAGS, cells):
                k = round(cell * 10)
                for i in range(1000):
                    value = 0.95 if i < k else 0.05
                    score_lines.append(f"{label}:{i},{tag},{value}")
        score_path = tmp_path / "clc_scores.csv"
        score_path.write_text("\n".join(score_lines) + "\n")

        config = {
            "seed": 1,
            "out_dir": str(tmp_path / "out"),
            "tau": 0.85,
            "communities": [
                {"tag": tag, "corpus": [], "train_months": [], "val_months": []}
                for tag in TAGS
            ],
            "taboo_datasets": datasets,
            "clc_scores": str(score_path),
        }
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(config))
        assert cli.main(["audit-dataset", "--config", str(config_path)]) == 0

        lines = [
            line.split("\t")
            for line in (tmp_path / "out" / "proportions.tsv").read_text().strip().splitlines()
        ]
        header, *body = lines
        by_row = {row[0]: row[1:] for row in body}
        for j, (label, _cells, mean, sd, _bold) in enumerate(REFERENCE_COLUMNS):
            computed_mean = float(by_row["Average"][j])
            computed_sd = float(by_row["Std. Dev."][j])
            if label != "Gab-Hate":
                assert abs(computed_mean - mean) <= 0.05, label
            else:
                assert computed_mean == 10.9  # the source's 13.2 is a typo
            assert abs(computed_sd - sd) <= 0.05, label

        markdown = (tmp_path / "out" / "proportions.md").read_text()
        for label, cells, _mean, _sd, bold in REFERENCE_COLUMNS:
            for tag, cell in zip(TAGS, cells):
                if tag in bold:
                    assert f"**{cell}**" in markdown

    def test_no_instance_above_tau_gives_header_only_flags(self, world, tmp_path):
        from conftest import write_taboo_tsv

        neutral = tmp_path / "neutral.tsv"
        write_taboo_tsv(
            neutral,
            [(f"n{i}", "wholly unseen wording here", "OFF") for i in range(5)],
        )
        datasets = [
            {
                "name": "Neutral",
                "path": str(neutral),
                "text_column": "tweet",
                "label_column": "subtask_a",
                "id_column": "id",
                "keep_label": "OFF",
            }
        ]
        code = run(world, "audit-dataset", taboo_datasets=datasets)
        world.write_config()
        assert code == 0
        flags_text = (world.out / "reset_flags.csv").read_text()
        assert flags_text == "id,community,alignment\n"


class TestReport:
    def test_consolidated_report(self, world):
        for command in ("calibrate", "validate", "audit-dataset", "report"):
            assert run(world, command) == 0
        text = (world.out / "report.md").read_text()
        assert text.startswith("# Community alignment audit")
        assert "- seed: 424242" in text
        assert "## Validation matrix" in text
        assert "## Dataset high-alignment proportions" in text
        assert "## Reset flags" in text
        assert "2026-01-01T00:00:00+00:00" in text
        assert "sha256" in text

    def test_report_omits_missing_sections(self, world, tmp_path):
        code = run(world, "report", out_dir=str(tmp_path / "fresh"))
        world.write_config()
        assert code == 0
        text = (tmp_path / "fresh" / "report.md").read_text()
        assert "## Metadata" in text
        assert "## Validation matrix" not in text
