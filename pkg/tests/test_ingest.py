import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motioncred.activities import PHONE_ACCEL, PHONE_GYRO, WATCH_ACCEL, WATCH_GYRO
from motioncred.errors import FormatError, FusionError
from motioncred.ingest import (
    FeatureTable,
    FeatureVector,
    RawWindow,
    SensorReading,
    extract_features,
    feature_names,
    fuse,
    fuse_dataset,
    parse_raw,
    serialize_reading,
    window,
)

from oracles.feature_oracle import sine_fixture, window_features

# Frozen output of tests/oracles/feature_oracle.py for the sine fixture.
SINE_WINDOW_FEATURES = [
    0.205,
    0.09,
    0.07,
    0.07,
    0.065,
    0.065,
    0.07,
    0.07,
    0.09,
    0.205,
    8.215650382226158e-17,
    2.121320343559643,
    4.500000000000001,
    1.9097022348861479,
    0.905,
    0.205,
    0.09,
    0.07,
    0.07,
    0.065,
    0.065,
    0.07,
    0.07,
    0.09,
    0.205,
    -2.0000000000000013,
    1.0606601717798212,
    1.1249999999999998,
    0.9548875748268998,
    0.43636363636363634,
    0.2,
    0.08,
    0.08,
    0.08,
    0.04,
    0.08,
    0.08,
    0.08,
    0.08,
    0.2,
    9.800000000000011,
    0.5656854249492381,
    0.32000000000000006,
    0.5086254350036902,
    0.0,
    -4.996003610813204e-17,
    8.251501334063009e-17,
    -1.937686122666093e-16,
    -4.901092497827216e-17,
    3.113640189956783e-17,
    -0.8819840693066211,
    10.277419389446484,
]


def make_readings(n, subject=1600, activity="A", source=PHONE_ACCEL, t0=1, rng=None):
    rng = rng or np.random.default_rng(0)
    vals = rng.normal(size=(n, 3))
    return [
        SensorReading(subject, activity, t0 + i * 50_000_000, source, *map(float, vals[i]))
        for i in range(n)
    ]


class TestParseRaw:
    def test_first_corpus_line(self):
        # First line of the published raw data file, frozen before implementation.
        line = "1600,A,252207666810782,-0.36,8.87,1.37;"
        readings, malformed = parse_raw([line], PHONE_ACCEL)
        assert malformed == 0
        (r,) = readings
        assert r.subject_id == 1600
        assert r.activity == "A"
        assert r.timestamp == 252207666810782
        assert (r.x, r.y, r.z) == (-0.36, 8.87, 1.37)
        assert r.source == PHONE_ACCEL

    def test_empty_stream(self):
        readings, malformed = parse_raw([], PHONE_ACCEL)
        assert readings == [] and malformed == 0

    def test_garbage_among_valid(self):
        lines = [f"1600,A,{1000 + i},0.1,0.2,0.3;" for i in range(9)]
        lines.insert(4, "garbage")
        readings, malformed = parse_raw(lines, PHONE_ACCEL)
        assert len(readings) == 9
        assert malformed == 1

    def test_trailing_semicolon_optional(self):
        readings, _ = parse_raw(["1600,A,5,1,2,3", "1600,A,6,1,2,3;"], PHONE_ACCEL)
        assert len(readings) == 2

    def test_mostly_malformed_raises(self):
        lines = ["nonsense"] * 6 + ["1600,A,5,1,2,3;"] * 4
        with pytest.raises(FormatError):
            parse_raw(lines, PHONE_ACCEL)

    def test_blank_lines_ignored(self):
        readings, malformed = parse_raw(["", "  ", "1600,A,5,1,2,3;"], PHONE_ACCEL)
        assert len(readings) == 1 and malformed == 0

    @given(
        subject=st.integers(min_value=1600, max_value=1650),
        code=st.sampled_from("ABCDEFGHIJKLMOPQRS"),
        ts=st.integers(min_value=1, max_value=10**15),
        xyz=st.tuples(
            st.floats(-50, 50, allow_nan=False),
            st.floats(-50, 50, allow_nan=False),
            st.floats(-50, 50, allow_nan=False),
        ),
    )
    def test_parse_serialize_roundtrip(self, subject, code, ts, xyz):
        r = SensorReading(subject, code, ts, WATCH_GYRO, *xyz)
        (parsed,), malformed = parse_raw(io.StringIO(serialize_reading(r) + "\n"), WATCH_GYRO)
        assert malformed == 0
        assert parsed == r


class TestWindow:
    def test_450_readings_two_windows(self):
        wins = window(make_readings(450))
        assert len(wins) == 2
        assert all(w.samples.shape == (200, 3) for w in wins)
        assert [w.window_index for w in wins] == [0, 1]

    def test_199_readings_no_window(self):
        assert window(make_readings(199)) == []

    def test_subject_boundary_not_spanned(self):
        readings = make_readings(200, subject=1600) + make_readings(200, subject=1601)
        wins = window(readings)
        assert len(wins) == 2
        assert sorted(w.subject_id for w in wins) == [1600, 1601]

    def test_source_boundary_not_spanned(self):
        readings = make_readings(300, source=PHONE_ACCEL) + make_readings(300, source=PHONE_GYRO)
        wins = window(readings)
        assert len(wins) == 2
        assert sorted(w.source for w in wins) == [PHONE_ACCEL, PHONE_GYRO]

    @given(counts=st.lists(st.integers(min_value=0, max_value=520), min_size=1, max_size=4))
    @settings(max_examples=25, deadline=None)
    def test_partition_property(self, counts):
        # Every reading lands in exactly one window or is discarded; the
        # discard count per group is total - 200 * windows.
        readings = []
        for g, n in enumerate(counts):
            readings.extend(make_readings(n, subject=1600 + g))
        wins = window(readings)
        per_group = {}
        for w in wins:
            per_group[w.subject_id] = per_group.get(w.subject_id, 0) + 1
        for g, n in enumerate(counts):
            got = per_group.get(1600 + g, 0)
            assert got == n // 200
            assert n - 200 * got == n % 200


class TestExtractFeatures:
    def sine_window(self):
        xs, ys, zs = sine_fixture()
        samples = np.column_stack([xs, ys, zs])
        return RawWindow(1600, "A", PHONE_ACCEL, 0, samples, 20.0)

    def test_sine_window_matches_frozen_oracle(self):
        fv = extract_features(self.sine_window())
        assert fv.values.shape == (52,)
        np.testing.assert_allclose(fv.values, SINE_WINDOW_FEATURES, rtol=1e-9, atol=1e-12)

    def test_constant_axis_degenerates(self):
        rng = np.random.default_rng(3)
        samples = np.column_stack(
            [np.full(200, 2.5), rng.normal(size=200), rng.normal(size=200)]
        )
        fv = extract_features(RawWindow(1600, "A", PHONE_ACCEL, 0, samples))
        names = feature_names((PHONE_ACCEL,))
        feat = dict(zip(names, fv.values))
        assert feat["pa_x_bin0"] == 1.0
        assert all(feat[f"pa_x_bin{i}"] == 0.0 for i in range(1, 10))
        assert feat["pa_x_std"] == 0.0
        assert feat["pa_corr_xy"] == 0.0 and feat["pa_corr_xz"] == 0.0

    def test_equal_axes_perfectly_correlated(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=200)
        samples = np.column_stack([x, x, rng.normal(size=200)])
        fv = extract_features(RawWindow(1600, "A", PHONE_ACCEL, 0, samples))
        feat = dict(zip(feature_names((PHONE_ACCEL,)), fv.values))
        assert feat["pa_corr_xy"] == pytest.approx(1.0)
        assert feat["pa_cos_xy"] == pytest.approx(1.0)

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_matches_straight_line_oracle_on_random_windows(self, seed):
        rng = np.random.default_rng(seed)
        samples = rng.normal(scale=rng.uniform(0.1, 5.0), size=(200, 3)) + rng.uniform(-3, 3)
        fv = extract_features(RawWindow(1600, "A", PHONE_ACCEL, 0, samples))
        expected = window_features(
            samples[:, 0].tolist(), samples[:, 1].tolist(), samples[:, 2].tolist()
        )
        np.testing.assert_allclose(fv.values, expected, rtol=1e-9, atol=1e-12)

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_bins_sum_to_one_and_finite(self, seed):
        rng = np.random.default_rng(seed)
        samples = rng.normal(size=(200, 3))
        fv = extract_features(RawWindow(1600, "A", PHONE_ACCEL, 0, samples))
        assert np.all(np.isfinite(fv.values))
        for a in range(3):
            assert abs(fv.values[a * 15 : a * 15 + 10].sum() - 1.0) < 1e-9

    def test_order_invariant_stats_under_shuffle(self):
        rng = np.random.default_rng(7)
        samples = rng.normal(size=(200, 3))
        shuffled = samples[rng.permutation(200)]
        a = extract_features(RawWindow(1600, "A", PHONE_ACCEL, 0, samples)).values
        b = extract_features(RawWindow(1600, "A", PHONE_ACCEL, 0, shuffled)).values
        names = feature_names((PHONE_ACCEL,))
        order_free = [
            i
            for i, n in enumerate(names)
            if "peak_gap" not in n and "corr" not in n and "cos" not in n
        ]
        np.testing.assert_allclose(a[order_free], b[order_free], rtol=1e-9, atol=1e-12)


class TestFuse:
    def fv(self, source, dim=52, subject=1600, widx=0):
        return FeatureVector(subject, "A", (source,), np.full(dim, hash(source) % 7 + 0.5), widx)

    def test_single_source_identity(self):
        v = self.fv(PHONE_ACCEL)
        fused = fuse({PHONE_ACCEL: v}, (PHONE_ACCEL,))
        np.testing.assert_array_equal(fused.values, v.values)
        assert fused.sensor_mask == (PHONE_ACCEL,)

    def test_two_sources_104(self):
        fused = fuse(
            {PHONE_ACCEL: self.fv(PHONE_ACCEL), WATCH_ACCEL: self.fv(WATCH_ACCEL)},
            (PHONE_ACCEL, WATCH_ACCEL),
        )
        assert fused.values.shape == (104,)

    def test_all_four_208(self):
        vectors = {s: self.fv(s) for s in (PHONE_ACCEL, PHONE_GYRO, WATCH_ACCEL, WATCH_GYRO)}
        fused = fuse(vectors)
        assert fused.values.shape == (208,)
        assert fused.sensor_mask == (PHONE_ACCEL, PHONE_GYRO, WATCH_ACCEL, WATCH_GYRO)

    def test_missing_source_raises(self):
        with pytest.raises(FusionError):
            fuse({PHONE_ACCEL: self.fv(PHONE_ACCEL)}, (PHONE_ACCEL, WATCH_ACCEL))

    def test_mismatched_window_raises(self):
        with pytest.raises(FusionError):
            fuse(
                {
                    PHONE_ACCEL: self.fv(PHONE_ACCEL, widx=0),
                    WATCH_ACCEL: self.fv(WATCH_ACCEL, widx=1),
                },
                (PHONE_ACCEL, WATCH_ACCEL),
            )

    @given(dims=st.lists(st.integers(1, 60), min_size=1, max_size=4))
    @settings(max_examples=20, deadline=None)
    def test_fused_length_is_sum(self, dims):
        sources = (PHONE_ACCEL, PHONE_GYRO, WATCH_ACCEL, WATCH_GYRO)[: len(dims)]
        vectors = {s: self.fv(s, dim=d) for s, d in zip(sources, dims)}
        fused = fuse(vectors, sources)
        assert fused.values.size == sum(dims)

    def test_fuse_dataset_inner_join(self):
        # Window 1 lacks the watch source and must be dropped.
        vs = [
            self.fv(PHONE_ACCEL, widx=0),
            self.fv(WATCH_ACCEL, widx=0),
            self.fv(PHONE_ACCEL, widx=1),
        ]
        fused = fuse_dataset(vs, (PHONE_ACCEL, WATCH_ACCEL))
        assert len(fused) == 1
        assert fused[0].window_index == 0


class TestFeatureTable:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(11)
        readings = make_readings(400, rng=rng) + make_readings(
            400, subject=1601, activity="B", rng=rng
        )
        wins = window(readings)
        table = FeatureTable.from_vectors([extract_features(w) for w in wins])
        path = tmp_path / "features.csv"
        table.save(path)
        loaded = FeatureTable.load(path)
        np.testing.assert_array_equal(loaded.subjects, table.subjects)
        np.testing.assert_array_equal(loaded.activities, table.activities)
        np.testing.assert_array_equal(loaded.window_indices, table.window_indices)
        assert loaded.mask == table.mask
        assert loaded.names == table.names
        np.testing.assert_array_equal(loaded.X, table.X)

    def test_filter(self):
        table = FeatureTable(
            subjects=np.array([1, 1, 2]),
            activities=np.array(["A", "B", "A"]),
            window_indices=np.array([0, 0, 0]),
            mask=(PHONE_ACCEL,),
            X=np.zeros((3, 2)),
            names=["f0", "f1"],
        )
        assert len(table.filter(activity="A")) == 2
        assert len(table.filter(activity="A", subjects=[2])) == 1
