import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softfail import aging, physics
from softfail.dataset import (
    Normalizer, Scaler, WindowSpec, build_dataset, load_dataset, make_split, resample,
    save_dataset, sequence_raw_index, split_sizes, window_count, windowize)
from softfail.errors import DatasetError


def _brute_force_windows(L, stride, length):
    out, start = [], 0
    while start + length <= L:
        out.append(list(range(start, start + length)))
        start += stride
    return out


@pytest.fixture(scope="module")
def small_trace():
    params = physics.PhysicalParams(snr_penalty_db=5.7)
    w = aging.WeibullProcessParams(horizon_samples=40_000, units_per_event=4e5)
    return aging.simulate(w, params, physics.paper_lightpath(), 2)


class TestResample:
    def test_year_scale(self):
        assert 365 * 24 * 60 / 90 == 5840
        rs = resample(np.arange(5840 * 75), 1.2, 90)
        assert len(rs.values) == 5840
        assert np.all(np.diff(rs.raw_index) == 75)

    def test_keeps_last_sample_of_each_window(self):
        rs = resample(np.arange(1000), 1.2, 90)
        assert rs.raw_index[0] == 74 and rs.values[1] == 149
        assert len(rs.values) == 13

    def test_non_integer_ratio(self):
        # 4 raw samples of 1 min per 2.5-min window: windows end at 2.5, 5.0, 7.5
        rs = resample(np.arange(8), 1.0, 2.5)
        assert list(rs.raw_index) == [2, 4, 7]

    def test_unit_window_is_identity(self):
        x = np.random.default_rng(0).random(37)
        assert np.array_equal(resample(x, 90, 90).values, x)

    def test_errors(self):
        with pytest.raises(DatasetError):
            resample(np.arange(74), 1.2, 90)
        with pytest.raises(DatasetError):
            resample(np.array([]), 1.2, 90)


class TestWindowize:
    def test_single_and_overlap(self):
        spec = WindowSpec()
        assert spec.length == 121
        assert windowize(np.arange(121.0), spec).shape == (1, 121)
        w = windowize(np.arange(125.0), spec)
        assert len(w) == 3
        assert len(set(w[0]) & set(w[1])) == 119

    def test_paper_count(self):
        spec = WindowSpec()
        L = 2 * 6080 + 121
        assert L == 12281
        assert window_count(L, spec) == 6081
        assert len(windowize(np.zeros(L), spec)) == 6081

    def test_too_short(self):
        with pytest.raises(DatasetError):
            windowize(np.zeros(120), WindowSpec())
        assert window_count(120, WindowSpec()) == 0

    @given(L=st.integers(1, 400), stride=st.integers(1, 12), k=st.integers(0, 30),
           s=st.integers(1, 30))
    @settings(max_examples=200, deadline=None)
    def test_matches_brute_force(self, L, stride, k, s):
        spec = WindowSpec(past_len=k, future_len=s, stride=stride)
        expected = _brute_force_windows(L, stride, k + 1 + s)
        assert window_count(L, spec) == len(expected)
        if expected:
            assert windowize(np.arange(L, dtype=float), spec).tolist() == expected


class TestSplit:
    def test_paper_sizes(self):
        assert split_sizes(6081) == (5472, 1094, 609)
        sp = make_split(6081)
        assert sp.train == (0, 4378) and sp.val == (4378, 5472) and sp.test == (5472, 6081)

    def test_tiny(self):
        assert split_sizes(10) == (9, 1, 1)

    def test_empty_part(self):
        with pytest.raises(DatasetError):
            split_sizes(4)

    @given(st.integers(10, 100_000))
    def test_contiguous_ordered(self, n):
        sp = make_split(n)
        assert sp.train[0] == 0 and sp.train[1] == sp.val[0]
        assert sp.val[1] == sp.test[0] and sp.test[1] == n
        assert all(b > a for a, b in (sp.train, sp.val, sp.test))


class TestNormalizer:
    def test_minmax_endpoints(self):
        x = np.array([1e-9, 5e-5, 1e-3])
        n = Normalizer.fit(x, "minmax")
        y = n.apply(x)
        assert y[0] == 0.0 and y[-1] == pytest.approx(1.0, abs=1e-15)

    def test_zscore_constant_is_error(self):
        with pytest.raises(DatasetError):
            Normalizer.fit(np.full(5, 2.0), "zscore")

    def test_minmax_constant_warns_and_is_identity(self):
        with pytest.warns(RuntimeWarning):
            n = Normalizer.fit(np.full(5, 2.0), "minmax")
        assert n.apply(3.0) == 3.0

    @pytest.mark.parametrize("kind", ["minmax", "zscore", "none"])
    def test_roundtrip_1000_values(self, kind):
        x = np.random.default_rng(1).uniform(-1e3, 1e3, 1000)
        n = Normalizer.fit(x[:100], kind)
        back = n.invert(n.apply(x))
        assert np.max(np.abs(back - x) / np.abs(x)) < 1e-12

    @given(st.lists(st.floats(-1e6, 1e6).filter(lambda v: abs(v) > 1e-6), min_size=2, max_size=50))
    def test_roundtrip_property(self, values):
        x = np.array(values)
        if np.ptp(x) == 0:
            return
        n = Normalizer.fit(x, "minmax")
        # affine maps cancel digits, so the error is bounded on the data scale
        scale = np.max(np.abs(x))
        assert np.max(np.abs(n.invert(n.apply(x)) - x)) <= 1e-12 * scale

    def test_log10_scaler(self):
        sc = Scaler("log10", Normalizer("minmax", -9.0, 6.0))
        ber = np.array([1e-9, 1e-6, 1e-3])
        assert np.allclose(sc.encode(ber), [0.0, 0.5, 1.0])
        assert np.allclose(sc.decode(sc.encode(ber)), ber, rtol=1e-12)
        assert Scaler.from_dict(sc.to_dict()) == sc


class TestBuildDataset:
    def test_shapes_and_provenance(self, small_trace):
        spec = WindowSpec(past_len=10, future_len=5)
        ds = build_dataset(small_trace, spec)
        n_tau = len(small_trace) // 75
        assert len(ds) == window_count(n_tau, spec)
        assert ds.inputs.shape[1] == 11 and ds.targets.shape[1] == 5
        assert ds.provenance["trace_sha256"] == small_trace.digest()
        assert ds.sequences[0, 0] == small_trace.ber[74]
        assert sequence_raw_index(ds, 3, 7) == (3 * 2 + 7 + 1) * 75 - 1

    def test_normalizer_sees_no_test_data(self, small_trace):
        spec = WindowSpec(past_len=10, future_len=5)
        ds = build_dataset(small_trace, spec)
        lo, hi = ds.split.fit_range
        fit = ds.sequences[lo:hi]
        n = ds.scaler.normalizer
        assert n.offset == fit.min() and n.scale == pytest.approx(fit.max() - fit.min(), rel=1e-15)
        # a trace that only changes inside the test range must not move the statistics
        altered = ds.sequences.copy()
        altered[ds.split.test[0]:, -1] += 1.0
        assert Normalizer.fit(altered[lo:hi]) == n

    def test_subset_keeps_latest(self, small_trace):
        spec = WindowSpec(past_len=10, future_len=5)
        sub = build_dataset(small_trace, spec, n_sequences=40)
        assert len(sub) == 40
        series = resample(small_trace.ber, 1.2, 90).values
        assert sub.sequences[-1, -1] == series[-1]
        start = sub.provenance["tau_start"]
        assert np.array_equal(sub.sequences, windowize(series[start:], spec))
        with pytest.raises(DatasetError):
            build_dataset(small_trace, spec, n_sequences=10_000)

    def test_log10_transform(self, small_trace):
        spec = WindowSpec(past_len=10, future_len=5)
        ds = build_dataset(small_trace, spec, transform="log10")
        X, Y = ds.part("train")
        assert np.allclose(ds.scaler.decode(X), 10 ** ds.inputs[: len(X)], rtol=1e-12)

    def test_stride_one(self, small_trace):
        spec = WindowSpec(past_len=10, future_len=5, stride=1)
        ds = build_dataset(small_trace, spec)
        assert len(ds) == len(small_trace) // 75 - 16 + 1

    def test_file_roundtrip(self, small_trace, tmp_path):
        ds = build_dataset(small_trace, WindowSpec(past_len=10, future_len=5), transform="log10")
        path = tmp_path / "ds.csv"
        save_dataset(path, ds)
        back = load_dataset(path)
        assert np.array_equal(back.sequences, ds.sequences)
        assert back.split == ds.split and back.spec == ds.spec
        assert back.scaler == ds.scaler and back.provenance == ds.provenance
        save_dataset(tmp_path / "b.csv", back)
        assert (tmp_path / "b.csv").read_bytes() == path.read_bytes()

    def test_warns_if_training_range_already_failed(self, small_trace, caplog):
        spec = WindowSpec(past_len=10, future_len=5)
        with warnings.catch_warnings():
            build_dataset(small_trace, spec, max_train_ber=1e-30)
        assert "training range" in caplog.text
