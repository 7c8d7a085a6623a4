import numpy as np
import pytest

from motioncred.errors import TrainingError
from motioncred.forest import ForestParams
from motioncred.identification import (
    AccuracyTable,
    evaluate_identification,
    probability_stats,
    train_identification,
)
from motioncred.synth import SynthConfig, synth_generate, synth_generate_multi

from test_synth import holdout, nearest_centroid_accuracy

PHONE = ("phone-accel",)
PARAMS = ForestParams(n_trees=25)


@pytest.fixture(scope="module")
def synth_table():
    return synth_generate(SynthConfig(5, 30, 8, 8.0, seed=17), activity="A")


class TestTrainIdentification:
    def test_separated_synth_high_accuracy(self, synth_table):
        tr, te = holdout(synth_table, 0.5, seed=4)
        assert (
            nearest_centroid_accuracy(
                synth_table.X[tr],
                synth_table.subjects[tr],
                synth_table.X[te],
                synth_table.subjects[te],
            )
            == 1.0
        )
        forest = train_identification(synth_table, "A", PHONE, seed=1, params=PARAMS)
        acc = float((forest.predict(synth_table.X[te]) == synth_table.subjects[te]).mean())
        assert acc >= 0.99

    def test_missing_activity_raises(self, synth_table):
        with pytest.raises(TrainingError):
            train_identification(synth_table, "B", PHONE, seed=1, params=PARAMS)

    def test_single_subject_raises(self):
        table = synth_generate(SynthConfig(2, 15, 4, 5.0, seed=3)).filter(subjects=[1600])
        with pytest.raises(TrainingError):
            train_identification(table, "A", PHONE, seed=0, params=PARAMS)

    def test_wrong_mask_raises(self, synth_table):
        with pytest.raises(TrainingError):
            train_identification(synth_table, "A", ("watch-gyro",), seed=0, params=PARAMS)


class TestEvaluateIdentification:
    def test_synth_cv_accuracy_and_average_row(self):
        table = synth_generate_multi(SynthConfig(4, 20, 6, 8.0, seed=23), ["A", "B"])
        result = evaluate_identification({PHONE: table}, ["A", "B"], seed=5, k=4, params=PARAMS)
        assert set(result.cells) == {("A", PHONE), ("B", PHONE)}
        for acc in result.cells.values():
            assert acc >= 0.99
        avg = result.average_row()[PHONE]
        assert avg == pytest.approx(np.mean(list(result.cells.values())))

    def test_absent_activity_skipped(self, synth_table):
        result = evaluate_identification({PHONE: synth_table}, ["A", "S"], seed=5, k=3, params=PARAMS)
        assert ("S", PHONE) not in result.cells
        assert ("A", PHONE) in result.cells

    def test_parallel_matches_serial(self, synth_table):
        serial = evaluate_identification({PHONE: synth_table}, ["A"], seed=9, k=3, params=PARAMS)
        parallel = evaluate_identification(
            {PHONE: synth_table}, ["A"], seed=9, k=3, params=PARAMS, n_jobs=2
        )
        assert serial.cells == parallel.cells


class TestAccuracyDefinition:
    def test_constant_predictor_scores_prevalence(self):
        # Top-1 micro-averaged accuracy of a constant guess equals the
        # guessed subject's prevalence in the test set.
        y = np.array([1600] * 30 + [1601] * 10)
        constant_pred = np.full(40, 1600)
        acc = float((constant_pred == y).mean())
        assert acc == 0.75


class TestProbabilityStats:
    def test_stats_fields(self, synth_table):
        forest = train_identification(synth_table, "A", PHONE, seed=2, params=PARAMS)
        stats = probability_stats(forest, synth_table.X, "benign", y_true=synth_table.subjects)
        assert stats.n_samples == len(synth_table)
        assert stats.histogram.sum() == stats.n_samples
        assert 1.0 / 5 <= stats.mean <= 1.0
        assert stats.correct is not None and stats.correct.mean() > 0.9

    def test_top1_never_below_uniform(self, synth_table):
        forest = train_identification(synth_table, "A", PHONE, seed=2, params=PARAMS)
        rng = np.random.default_rng(0)
        noise = rng.normal(scale=10.0, size=(64, synth_table.dim))
        stats = probability_stats(forest, noise, "benign")
        assert (stats.values >= 1.0 / len(forest.classes) - 1e-12).all()

    def test_degenerate_single_sample(self):
        class OneHot:
            classes = np.array([0, 1, 2])

            def predict_proba(self, X):
                out = np.zeros((len(X), 3))
                out[:, 0] = 1.0
                return out

        stats = probability_stats(OneHot(), np.zeros((1, 4)), "benign")
        assert stats.mean == 1.0 and stats.std == 0.0

    def test_empty_sample_set_raises(self, synth_table):
        forest = train_identification(synth_table, "A", PHONE, seed=2, params=PARAMS)
        with pytest.raises(ValueError):
            probability_stats(forest, np.zeros((0, synth_table.dim)), "benign")
