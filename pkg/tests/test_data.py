import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from signalprune import data
from signalprune.errors import (
    DegenerateDatasetError,
    EmptyInputError,
    ParseError,
    ShapeError,
    StratificationError,
)


def write(tmp_path, text, name="seg.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestLoad:
    def test_two_row_file(self, tmp_path):
        ds = data.load_dataset(write(tmp_path, "label,s0,s1,s2\n0,1,2,3\n1,4,5,6\n"))
        assert ds.n == 2 and ds.d == 3 and ds.n_classes == 2
        np.testing.assert_array_equal(ds.segments, [[1, 2, 3], [4, 5, 6]])
        np.testing.assert_array_equal(ds.labels, [0, 1])

    def test_nan_sample_retained(self, tmp_path):
        ds = data.load_dataset(write(tmp_path, "label,s0,s1,s2\n0,1,2,NaN\n"))
        assert ds.n == 1
        assert np.isnan(ds.segments[0, 2])

    def test_wrong_column_count_reports_line(self, tmp_path):
        with pytest.raises(ParseError) as exc:
            data.load_dataset(write(tmp_path, "label,s0,s1\n0,1,2\n1,3\n"))
        assert exc.value.line_no == 3

    def test_bad_label(self, tmp_path):
        with pytest.raises(ParseError):
            data.load_dataset(write(tmp_path, "label,s0\nx,1\n"))
        with pytest.raises(ParseError):
            data.load_dataset(write(tmp_path, "label,s0\n-1,1\n"))

    def test_empty_file(self, tmp_path):
        with pytest.raises(EmptyInputError):
            data.load_dataset(write(tmp_path, ""))
        with pytest.raises(EmptyInputError):
            data.load_dataset(write(tmp_path, "label,s0\n"))

    def test_round_trip_of_synthetic_file(self, tmp_path):
        ds = data.synth_generate(data.SynthConfig(n_per_class=100, d=16, n_classes=3, seed=5))
        path = tmp_path / "synth.csv"
        data.save_dataset(ds, path)
        back = data.load_dataset(path)
        np.testing.assert_array_equal(back.segments, ds.segments)
        np.testing.assert_array_equal(back.labels, ds.labels)
        assert back.n_classes == ds.n_classes


class TestClean:
    def test_middle_nan_row_dropped_in_order(self):
        seg = np.array([[1.0, 2.0], [np.nan, 0.0], [3.0, 4.0]])
        ds = data.SignalDataset(seg, np.array([0, 1, 1]), 2)
        out = data.clean(ds)
        np.testing.assert_array_equal(out.segments, [[1, 2], [3, 4]])
        np.testing.assert_array_equal(out.labels, [0, 1])

    def test_all_finite_identity(self):
        ds = data.synth_generate(data.SynthConfig(n_per_class=5, d=8, n_classes=2, seed=1))
        out = data.clean(ds)
        np.testing.assert_array_equal(out.segments, ds.segments)

    def test_survivor_count_matches_row_scan(self):
        rng = np.random.default_rng(11)
        seg = rng.normal(size=(200, 6))
        bad = rng.random(size=200) < 0.1
        cols = rng.integers(0, 6, size=200)
        seg[bad, cols[bad]] = np.nan
        labels = rng.integers(0, 3, size=200)
        labels[:3] = [0, 1, 2]  # keep every class alive
        seg[:3] = 0.0
        ds = data.SignalDataset(seg, labels, 3)
        # independent oracle: per-row python scan
        finite_rows = sum(1 for row in seg if all(math.isfinite(v) for v in row))
        assert data.clean(ds).n == finite_rows

    def test_degenerate_results_raise(self):
        ds = data.SignalDataset(np.full((2, 2), np.nan), np.array([0, 1]), 2)
        with pytest.raises(DegenerateDatasetError):
            data.clean(ds)
        seg = np.array([[1.0, 1.0], [np.nan, 1.0]])
        with pytest.raises(DegenerateDatasetError):
            data.clean(data.SignalDataset(seg, np.array([0, 1]), 2))

    def test_idempotent(self):
        rng = np.random.default_rng(7)
        seg = rng.normal(size=(50, 4))
        seg[rng.random(50) < 0.2, 0] = np.inf
        labels = np.tile([0, 1], 25)
        ds = data.SignalDataset(seg, labels, 2)
        once = data.clean(ds)
        twice = data.clean(once)
        np.testing.assert_array_equal(once.segments, twice.segments)
        np.testing.assert_array_equal(once.labels, twice.labels)


class TestStandardize:
    def test_two_value_feature(self):
        ds = data.SignalDataset(np.array([[1.0], [3.0]]), np.array([0, 1]), 2)
        sc = data.standardize_fit(ds)
        assert sc.mean[0] == 2.0 and sc.std[0] == 1.0

    def test_constant_feature_clamped(self):
        ds = data.SignalDataset(np.array([[5.0], [5.0], [5.0]]), np.array([0, 1, 1]), 2)
        sc = data.standardize_fit(ds)
        assert sc.mean[0] == 5.0 and sc.std[0] == data.STD_EPS

    def test_matches_two_pass_oracle(self):
        rng = np.random.default_rng(3)
        seg = rng.normal(2.0, 5.0, size=(100, 8))
        ds = data.SignalDataset(seg, rng.integers(0, 2, 100), 2)
        sc = data.standardize_fit(ds)
        # independent two-pass oracle in plain python
        for j in range(8):
            col = [float(seg[i, j]) for i in range(100)]
            mean = sum(col) / len(col)
            var = sum((v - mean) ** 2 for v in col) / len(col)
            assert abs(sc.mean[j] - mean) < 1e-9
            assert abs(sc.std[j] - math.sqrt(var)) < 1e-9

    def test_apply_arithmetic(self):
        ds = data.SignalDataset(np.array([[1.0], [3.0]]), np.array([0, 1]), 2)
        out = data.standardize_apply(ds, data.Scaler(np.array([2.0]), np.array([1.0])))
        np.testing.assert_array_equal(out.segments, [[-1.0], [1.0]])

    def test_fit_apply_yields_unit_moments(self):
        rng = np.random.default_rng(4)
        seg = rng.normal(-3.0, 2.5, size=(128, 6))
        ds = data.SignalDataset(seg, rng.integers(0, 2, 128), 2)
        out = data.standardize_apply(ds, data.standardize_fit(ds))
        assert np.abs(out.segments.mean(axis=0)).max() < 1e-7
        assert np.abs(out.segments.var(axis=0) - 1.0).max() < 1e-6

    def test_identity_scaler(self):
        ds = data.SignalDataset(np.array([[1.0, -2.0]]), np.array([0]), 1)
        out = data.standardize_apply(ds, data.Scaler(np.zeros(2), np.ones(2)))
        np.testing.assert_array_equal(out.segments, ds.segments)

    def test_dimension_mismatch(self):
        ds = data.SignalDataset(np.ones((2, 3)), np.array([0, 0]), 1)
        with pytest.raises(ShapeError):
            data.standardize_apply(ds, data.Scaler(np.zeros(2), np.ones(2)))


class TestSplit:
    def test_two_classes_of_fifty(self):
        labels = np.repeat([0, 1], 50)
        ds = data.SignalDataset(np.zeros((100, 4)), labels, 2)
        tr, va, te = data.stratified_split(ds, data.SplitRatios(), seed=0)
        for split, want in ((tr, 32), (va, 8), (te, 10)):
            assert list(split.class_counts()) == [want, want]

    def test_thirds_of_three(self):
        ds = data.SignalDataset(np.zeros((3, 4)), np.zeros(3, dtype=int), 1)
        r = data.SplitRatios(1 / 3, 1 / 3, 1 / 3)
        tr, va, te = data.stratified_split(ds, r, seed=1)
        assert (tr.n, va.n, te.n) == (1, 1, 1)

    def test_small_class_raises(self):
        ds = data.SignalDataset(np.zeros((5, 2)), np.array([0, 0, 0, 1, 1]), 2)
        with pytest.raises(StratificationError):
            data.stratified_split(ds, data.SplitRatios(), seed=0)

    def test_histograms_match_count_oracle(self):
        rng = np.random.default_rng(9)
        labels = rng.integers(0, 5, size=230)
        labels[:15] = np.repeat(np.arange(5), 3)
        ds = data.SignalDataset(rng.normal(size=(230, 3)), labels, 5)
        r = data.SplitRatios(0.5, 0.25, 0.25)
        tr, va, te = data.stratified_split(ds, r, seed=2)
        counts = Counter(labels.tolist())
        for c in range(5):
            n_c = counts[c]
            want_tr = math.floor(r.train * n_c + 1e-9)
            want_va = math.floor(r.val * n_c + 1e-9)
            assert tr.class_counts()[c] == want_tr
            assert va.class_counts()[c] == want_va
            assert te.class_counts()[c] == n_c - want_tr - want_va

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_partition_property(self, seed):
        rng = np.random.default_rng(seed)
        labels = np.concatenate([np.repeat(c, rng.integers(3, 20)) for c in range(3)])
        tr, va, te = data.stratified_split_indices(labels, 3, data.SplitRatios(), seed)
        merged = np.concatenate([tr, va, te])
        assert len(set(merged.tolist())) == labels.size  # disjoint
        assert sorted(merged.tolist()) == list(range(labels.size))  # exhaustive

    def test_seed_determinism(self):
        labels = np.repeat([0, 1, 2], 10)
        a = data.stratified_split_indices(labels, 3, data.SplitRatios(), 42)
        b = data.stratified_split_indices(labels, 3, data.SplitRatios(), 42)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)


class TestSynth:
    def test_zero_noise_structure(self):
        ds = data.synth_generate(data.SynthConfig(n_per_class=4, d=32, n_classes=2, noise_sigma=0.0, seed=3))
        class0 = ds.segments[ds.labels == 0]
        class1 = ds.segments[ds.labels == 1]
        assert np.all(class0 == class0[0])
        assert not np.array_equal(class0[0], class1[0])

    def test_seed_determinism(self):
        cfg = data.SynthConfig(n_per_class=10, d=16, n_classes=3, seed=77)
        a, b = data.synth_generate(cfg), data.synth_generate(cfg)
        np.testing.assert_array_equal(a.segments, b.segments)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_nearest_centroid_learnable(self):
        ds = data.synth_generate(data.SynthConfig(n_per_class=400, n_classes=3, noise_sigma=0.3, seed=12))
        tr, _, te = data.stratified_split(ds, data.SplitRatios(), seed=0)
        centroids = np.stack([tr.segments[tr.labels == c].mean(axis=0) for c in range(3)])
        dist = ((te.segments[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        pred = dist.argmin(axis=1)
        assert (pred == te.labels).mean() > 0.95
