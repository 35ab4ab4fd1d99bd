import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clcaudit.calibrate import (
    CcdfCurve,
    CoverageUnattainableError,
    NoScoresError,
    ThresholdConfig,
    compute_ccdf,
    default_grid,
    select_threshold,
    validation_matrix,
)
from clcaudit.clc import FeatureConfig, ScoreTable, TrainHyper, train_clc
from clcaudit.corpus import CommunityCorpus, Utterance, build_training_set


def corpus_of(tag, texts):
    return CommunityCorpus(
        tag,
        tuple(
            Utterance(id=f"{tag}-{i}", raw_text=t, norm_text=t, source=tag, created_utc=1)
            for i, t in enumerate(texts)
        ),
    )


def curve_from_scores(scores, grid, tag="X"):
    return compute_ccdf(scores, grid, community_id=tag)


class TestThresholdConfig:
    def test_defaults(self):
        cfg = ThresholdConfig()
        assert cfg.tau == 0.85
        assert cfg.target_coverage == 0.52
        assert cfg.grid_step == 0.05

    @pytest.mark.parametrize("tau", [0.0, 1.0, -0.2, 1.7])
    def test_tau_bounds(self, tau):
        with pytest.raises(ValueError):
            ThresholdConfig(tau=tau)


class TestDefaultGrid:
    def test_covers_unit_interval(self):
        grid = default_grid()
        assert grid[0] == 0.0 and grid[-1] == 1.0
        assert len(grid) == 21
        for point in (0.65, 0.7, 0.85, 0.9):
            assert point in grid


class TestComputeCcdf:
    def test_half_at_085(self):
        curve = compute_ccdf([1.0, 0.9, 0.8, 0.7], [0.85])
        assert curve.survival == (0.5,)

    def test_all_equal_scores(self):
        curve = compute_ccdf([0.9] * 5, [0.0, 0.5, 0.9])
        assert curve.survival == (1.0, 1.0, 1.0)

    def test_closed_bound_ties_count(self):
        curve = compute_ccdf([0.85, 0.8], [0.85])
        assert curve.survival == (0.5,)

    def test_monte_carlo_uniform(self):
        rng = np.random.default_rng(7)
        scores = rng.uniform(size=1000)
        curve = compute_ccdf(scores, [0.25])
        assert curve.survival[0] == pytest.approx(0.75, abs=0.05)

    def test_empty_scores_error(self):
        with pytest.raises(NoScoresError, match="no scores"):
            compute_ccdf([], [0.5])

    def test_survival_at_zero_is_one(self):
        rng = np.random.default_rng(1)
        curve = compute_ccdf(rng.uniform(size=50), default_grid())
        assert curve.survival[0] == 1.0

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=100))
    @settings(max_examples=200, deadline=None)
    def test_monotone_non_increasing(self, scores):
        curve = compute_ccdf(scores, default_grid())
        assert all(a >= b for a, b in zip(curve.survival, curve.survival[1:]))

    def test_matches_counting_oracle(self):
        rng = np.random.default_rng(3)
        scores = rng.uniform(size=257)
        grid = default_grid()
        curve = compute_ccdf(scores, grid)
        for g, s in zip(curve.grid, curve.survival):
            assert s == sum(1 for x in scores if x >= g) / len(scores)


class TestCurveValidation:
    def test_rejects_non_ascending_grid(self):
        with pytest.raises(ValueError, match="ascending"):
            CcdfCurve("X", (0.5, 0.5), (1.0, 1.0))

    def test_rejects_increasing_survival(self):
        with pytest.raises(ValueError, match="non-increasing"):
            CcdfCurve("X", (0.1, 0.2), (0.5, 0.6))


def brute_force_threshold(curves, target):
    feasible = [
        g
        for i, g in enumerate(curves[0].grid)
        if min(c.survival[i] for c in curves) >= target
    ]
    return max(feasible) if feasible else None


class TestSelectThreshold:
    def test_forced_choice(self):
        grid = (0.65, 0.85, 0.90)
        a = CcdfCurve("A", grid, (0.9, 0.60, 0.40))
        b = CcdfCurve("B", grid, (0.8, 0.55, 0.52))
        assert select_threshold([a, b], 0.52) == 0.85

    def test_all_survival_one_picks_top(self):
        grid = (0.0, 0.5, 1.0)
        curve = CcdfCurve("A", grid, (1.0, 1.0, 1.0))
        assert select_threshold([curve], 0.52) == 1.0

    def test_matches_brute_force_on_random_curves(self):
        rng = np.random.default_rng(11)
        grid = default_grid()
        for _ in range(5):
            curves = [
                curve_from_scores(rng.beta(4, 2, size=300), grid, tag=f"c{i}")
                for i in range(5)
            ]
            target = rng.uniform(0.2, 0.8)
            expected = brute_force_threshold(curves, target)
            assert select_threshold(curves, target) == expected

    def test_unattainable_reports_best(self):
        grid = (0.65, 0.85)
        curve = CcdfCurve("A", grid, (0.4, 0.2))
        with pytest.raises(CoverageUnattainableError, match="coverage unattainable") as exc:
            select_threshold([curve], 0.52)
        assert exc.value.best_coverage == pytest.approx(0.4)
        assert exc.value.best_threshold == 0.65

    def test_mismatched_grids_rejected(self):
        a = CcdfCurve("A", (0.0, 0.5), (1.0, 0.5))
        b = CcdfCurve("B", (0.0, 0.6), (1.0, 0.5))
        with pytest.raises(ValueError, match="same grid"):
            select_threshold([a, b], 0.5)

    def test_floor_honored_whenever_it_returns(self):
        rng = np.random.default_rng(23)
        grid = default_grid()
        for _ in range(10):
            curves = [
                curve_from_scores(rng.uniform(size=200), grid, tag=f"c{i}")
                for i in range(3)
            ]
            target = rng.uniform(0.05, 0.95)
            tau = select_threshold(curves, target)
            i = grid.index(tau)
            assert min(c.survival[i] for c in curves) >= target


class TestValidationMatrix:
    def test_constant_scorer_row_is_100(self):
        val_sets = [corpus_of("NA", ["x", "y"]), corpus_of("HI", ["z"])]
        table = ScoreTable(
            entries={
                "NA-0": {"M": 0.9}, "NA-1": {"M": 0.9}, "HI-0": {"M": 0.9},
            }
        )
        matrix = validation_matrix(table, val_sets, tau=0.85)
        assert matrix.row_tags == ("M",)
        assert matrix.cells.tolist() == [[100.0, 100.0]]

    def test_empty_validation_set_error(self):
        with pytest.raises(ValueError, match="HI"):
            validation_matrix(
                ScoreTable(entries={}), [CommunityCorpus("HI", ())], tau=0.85
            )

    def test_missing_table_entry_error(self):
        val_sets = [corpus_of("NA", ["x"])]
        table = ScoreTable(entries={"other": {"M": 0.5}})
        with pytest.raises(ValueError, match="NA-0"):
            validation_matrix(table, val_sets, tau=0.85)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(5)
        texts = [f"t{i}" for i in range(40)]
        scores = {f"NA-{i}": {"M": float(s)} for i, s in enumerate(rng.uniform(size=40))}
        table = ScoreTable(entries=scores)
        base = corpus_of("NA", texts)
        shuffled = CommunityCorpus(
            "NA", tuple(base.utterances[i] for i in rng.permutation(40))
        )
        m1 = validation_matrix(table, [base], tau=0.6)
        m2 = validation_matrix(table, [shuffled], tau=0.6)
        assert m1.cells.tolist() == m2.cells.tolist()

    def test_disjoint_vocabulary_models_separate(self):
        rng = np.random.default_rng(2)
        vocab = {
            "A": [f"aa{i:02d}" for i in range(60)],
            "B": [f"zz{i:02d}" for i in range(60)],
        }

        def texts(tag, n):
            return [" ".join(rng.choice(vocab[tag], size=6)) for _ in range(n)]

        train = {tag: corpus_of(tag, texts(tag, 150)) for tag in "AB"}
        val = [corpus_of(tag, texts(tag, 60)) for tag in "AB"]
        cfg = FeatureConfig(hash_dim=1 << 12)
        models = [
            train_clc(
                build_training_set(train[tag], [train[other]], seed=3),
                cfg,
                TrainHyper(epochs=5),
                seed=3,
            )
            for tag, other in (("A", "B"), ("B", "A"))
        ]
        matrix = validation_matrix(models, val, tau=0.85)
        assert matrix.cells[0, 0] >= 90.0 and matrix.cells[1, 1] >= 90.0
        assert matrix.cells[0, 1] <= 10.0 and matrix.cells[1, 0] <= 10.0
