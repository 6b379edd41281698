import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mtsvae.timeseries import (
    CLASSIFICATION,
    REGRESSION,
    ChannelSpec,
    DataError,
    SynthSpec,
    instance_normalize,
    load_dataset,
    save_dataset,
    segment_stream,
    split_labeled_subset,
    synthesize_dataset,
)


def write_dataset(root, rates, duration, n_train, n_test, task="classification", label_rows=None):
    channels = [ChannelSpec.from_duration(f"c{i}", r, duration) for i, r in enumerate(rates)]
    manifest = {"name": "toy", "task": task, "n_classes": 2, "duration_s": duration,
                "channels": [{"name": ch.name, "sampling_rate_hz": ch.sampling_rate_hz} for ch in channels],
                "splits": {"train": "train", "test": "test"}}
    (root / "manifest.json").write_text(json.dumps(manifest))
    rng = np.random.default_rng(0)
    for split, n in (("train", n_train), ("test", n_test)):
        for ch in channels:
            np.savetxt(root / f"{split}_{ch.name}.csv", rng.standard_normal((n, ch.window_len)), delimiter=",")
        labels = np.arange(label_rows if (label_rows and split == "train") else n) % 2
        np.savetxt(root / f"{split}_labels.csv", labels, fmt="%d")
    return root / "manifest.json"


class TestLoad:
    def test_window_from_rate_and_duration(self, tmp_path):
        ds = load_dataset(write_dataset(tmp_path, [100, 1], 1.0, 10, 4))
        assert [ch.window_len for ch in ds.channels] == [100, 1]
        assert ds.n_train == 10 and ds.n_test == 4
        assert ds.train[0].shape == (10, 100)

    def test_row_count_mismatch(self, tmp_path):
        with pytest.raises(DataError, match="rows"):
            load_dataset(write_dataset(tmp_path, [10], 1.0, 9, 4, label_rows=10))

    def test_hydraulic_like_windows(self, tmp_path):
        rates = [20.0] * 6 + [10.0] * 2 + [1.0] * 9  # 17 channels, pressure at 20 Hz
        ds = load_dataset(write_dataset(tmp_path, rates, 60.0, 3, 2))
        assert ds.n_sig == 17
        assert max(ch.window_len for ch in ds.channels) == 1200
        assert all(ch.window_len <= 1200 for ch in ds.channels)

    def test_missing_file(self, tmp_path):
        path = write_dataset(tmp_path, [10], 1.0, 3, 2)
        (tmp_path / "test_c0.csv").unlink()
        with pytest.raises(DataError, match="missing"):
            load_dataset(path)

    def test_non_numeric_cell(self, tmp_path):
        path = write_dataset(tmp_path, [4], 1.0, 3, 2)
        (tmp_path / "train_c0.csv").write_text("1,2,3,4\n1,x,3,4\n1,2,3,4\n")
        with pytest.raises(DataError, match="non-numeric"):
            load_dataset(path)

    def test_nan_rejected(self, tmp_path):
        path = write_dataset(tmp_path, [4], 1.0, 3, 2)
        (tmp_path / "train_c0.csv").write_text("1,2,3,4\n1,nan,3,4\n1,2,3,4\n")
        with pytest.raises(DataError):
            load_dataset(path)

    def test_unknown_task(self, tmp_path):
        path = write_dataset(tmp_path, [4], 1.0, 3, 2)
        m = json.loads(path.read_text())
        m["task"] = "ranking"
        path.write_text(json.dumps(m))
        with pytest.raises(DataError, match="task"):
            load_dataset(path)

    def test_save_load_roundtrip(self, tmp_path):
        ds = synthesize_dataset(SynthSpec(n_sig=2, n_train=12, n_test=6), seed=3)
        save_dataset(ds, tmp_path)
        back = load_dataset(tmp_path)
        for a, b in zip(ds.train + ds.test, back.train + back.test):
            np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(ds.targets_train, back.targets_train)
        assert back.channels == ds.channels

    def test_regression_roundtrip(self, tmp_path):
        ds = synthesize_dataset(SynthSpec(n_train=12, n_test=6, task=REGRESSION), seed=3)
        save_dataset(ds, tmp_path)
        back = load_dataset(tmp_path)
        assert back.task == REGRESSION
        np.testing.assert_array_equal(ds.targets_test, back.targets_test)


class TestSynthesize:
    def test_deterministic(self):
        spec = SynthSpec(n_sig=2, n_classes=3, n_train=60, n_test=30)
        a, b = synthesize_dataset(spec, 7), synthesize_dataset(spec, 7)
        for x, y in zip(a.train + a.test, b.train + b.test):
            assert x.tobytes() == y.tobytes()
        assert a.targets_train.tobytes() == b.targets_train.tobytes()

    def test_noiseless_classes_identical_up_to_phase(self):
        spec = SynthSpec(n_sig=1, n_train=40, n_test=4, noise_std=0.0, phase_jitter=0.0)
        ds = synthesize_dataset(spec, 1)
        X, y = ds.train[0], ds.targets_train
        for c in range(3):
            rows = X[y == c]
            np.testing.assert_allclose(rows, np.broadcast_to(rows[0], rows.shape), atol=1e-12)
        assert not np.allclose(X[y == 0][0], X[y == 1][0])

    def test_regression_rms_tracks_target(self):
        ds = synthesize_dataset(SynthSpec(n_sig=2, n_train=200, n_test=10, task=REGRESSION), 5)
        rms = np.sqrt(np.mean(ds.train[0] ** 2, axis=1))
        r = np.corrcoef(rms, ds.targets_train)[0, 1]
        assert r > 0.9

    def test_degenerate_spec(self):
        with pytest.raises(DataError):
            synthesize_dataset(SynthSpec(n_sig=0), 0)
        with pytest.raises(DataError):
            synthesize_dataset(SynthSpec(n_train=0), 0)

    def test_channel_rates_differ(self):
        ds = synthesize_dataset(SynthSpec(n_sig=3), 0)
        assert [ch.window_len for ch in ds.channels] == [100, 50, 25]


class TestInstanceNormalize:
    def test_constant(self):
        np.testing.assert_array_equal(instance_normalize([5.0, 5.0, 5.0]), [0.0, 0.0, 0.0])

    def test_small_vector(self):
        # independent oracle: statistics module, population std
        import statistics
        x = [2.0, 4.0, 6.0]
        mu, sd = statistics.fmean(x), statistics.pstdev(x)
        expected = [(v - mu) / sd for v in x]
        np.testing.assert_allclose(instance_normalize(x), expected, rtol=1e-7)
        np.testing.assert_allclose(instance_normalize(x), [-1.22474, 0.0, 1.22474], atol=1e-5)

    def test_idempotent_on_standardized(self):
        x = np.array([-1.0, 1.0, -1.0, 1.0])
        np.testing.assert_allclose(instance_normalize(x), x, rtol=1e-7)

    def test_rows(self):
        X = np.array([[1.0, 2.0, 3.0], [4.0, 4.0, 4.0]])
        out = instance_normalize(X)
        np.testing.assert_allclose(out[0], instance_normalize(X[0]))
        np.testing.assert_array_equal(out[1], 0.0)

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.float64, st.integers(2, 64), elements=st.floats(-1e3, 1e3)))
    def test_moments(self, x):
        if np.ptp(x) < 1e-3:
            return
        z = instance_normalize(x)
        assert abs(z.mean()) < 1e-9
        assert abs(z.std() - 1.0) < 1e-6


class TestSegment:
    def test_hops(self):
        sig = np.arange(10.0)
        W = segment_stream(sig, 1.0, 4.0, 2.0)
        assert W.shape == (4, 4)
        # enumerate starts by hand
        np.testing.assert_array_equal(W[:, 0], [0, 2, 4, 6])
        for row in W:
            np.testing.assert_array_equal(row, np.arange(row[0], row[0] + 4))

    def test_exact_fit(self):
        assert segment_stream(np.arange(4.0), 1.0, 4.0, 1.0).shape == (1, 4)

    def test_too_short(self):
        with pytest.raises(ValueError):
            segment_stream(np.arange(3.0), 1.0, 4.0, 1.0)


class TestLabeledSubset:
    @staticmethod
    def fake(n, n_classes=3, task=CLASSIFICATION):
        spec = SynthSpec(n_sig=1, n_train=n, n_test=2, task=task, n_classes=n_classes, rates_hz=(8.0,))
        return synthesize_dataset(spec, 0)

    def test_reference_counts(self):
        assert len(split_labeled_subset(self.fake(1440), 0.01, 0).indices) == 14
        assert len(split_labeled_subset(self.fake(70152, 4), 0.001, 0).indices) == 70

    def test_full(self):
        ds = self.fake(50)
        np.testing.assert_array_equal(split_labeled_subset(ds, 1.0, 3).indices, np.arange(50))

    def test_class_floor_and_stratified(self):
        ds = self.fake(120, 4)
        sub = split_labeled_subset(ds, 0.01, 1)
        assert len(sub.indices) == 4
        assert set(ds.targets_train[sub.indices]) == {0, 1, 2, 3}

    def test_regression_floor(self):
        ds = self.fake(50, task=REGRESSION)
        assert len(split_labeled_subset(ds, 0.01, 0).indices) == 2

    def test_deterministic_sorted_unique(self):
        ds = self.fake(300)
        a = split_labeled_subset(ds, 0.1, 9).indices
        b = split_labeled_subset(ds, 0.1, 9).indices
        np.testing.assert_array_equal(a, b)
        assert np.all(np.diff(a) > 0)

    def test_out_of_range(self):
        ds = self.fake(20)
        for f in (0.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                split_labeled_subset(ds, f, 0)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(10, 400), st.floats(0.001, 1.0), st.integers(0, 2**31))
    def test_size_rule_and_coverage(self, n, f, seed):
        ds = self.fake(n)
        idx = split_labeled_subset(ds, f, seed).indices
        assert len(idx) == min(max(math.floor(f * n + 1e-9), 3), n)
        assert len(set(idx)) == len(idx)
        assert set(ds.targets_train[idx]) == set(ds.targets_train)
