"""Daily aggregation, feature engineering, normalization, splits."""

from datetime import date, timedelta

import numpy as np
import pytest

from conftest import make_frame, minute_csv, simple_epi_series
from exocast import stats
from exocast.errors import (
    ColumnMismatch,
    CoverageMismatch,
    TooFewRows,
    WindowTooSmall,
    ZeroVarianceColumn,
)
from exocast.features import (
    TARGET_NAME,
    FeatureFrame,
    SplitSpec,
    apply_normalizer,
    engineer_features,
    epi_column_names,
    fit_normalizer,
    invert_normalizer,
    load_frame,
    market_column_names,
    resample_daily,
    save_frame,
    split_chronological,
)
from exocast.ingest import align_date_range, parse_epi_daily, parse_minute_bars


def _aligned(days, closes_per_day, new_cases=None):
    bars = parse_minute_bars(minute_csv(days, closes_per_day))
    epi = parse_epi_daily(simple_epi_series(days, new_cases or [10] * len(days)))
    return align_date_range(bars, epi, days[0], days[-1])


class TestResampleDaily:
    def test_rollup(self):
        d = date(2020, 1, 6)
        aligned = _aligned([d], {d: [10.0, 11.0, 12.0]})
        (agg,) = resample_daily(aligned)
        assert agg.close == 12.0
        assert agg.volume == 3.0  # one unit per bar in the fixture helper
        assert agg.intraday["close"][0] == pytest.approx(11.0)

    def test_single_bar_degenerate(self):
        d = date(2020, 1, 6)
        aligned = _aligned([d], {d: [10.0]})
        (agg,) = resample_daily(aligned)
        assert agg.open == agg.close == 10.0
        assert agg.intraday["close"][1] == 0.0  # skew zeroed
        assert agg.intraday["close"][2] == 0.0  # kurt zeroed

    def test_cross_module_oracle_1440_bars(self):
        rng = np.random.default_rng(3)
        d = date(2020, 1, 6)
        closes = list(100 + rng.standard_normal(1440).cumsum() * 0.1)
        aligned = _aligned([d], {d: closes})
        (agg,) = resample_daily(aligned)
        raw = np.array([b.close for b in aligned.bars_by_day[d]])
        assert agg.intraday["close"][0] == pytest.approx(stats.mean(raw), rel=1e-12)
        assert agg.intraday["close"][1] == pytest.approx(stats.sample_skewness(raw), rel=1e-12)
        assert agg.intraday["close"][2] == pytest.approx(stats.excess_kurtosis(raw), rel=1e-12)


class TestEngineerFeatures:
    def _frame(self, n_days=12, new_cases=None):
        days = [date(2020, 1, 6) + timedelta(days=i) for i in range(n_days)]
        rng = np.random.default_rng(1)
        closes = {d: list(100 + rng.standard_normal(5).cumsum()) for d in days}
        aligned = _aligned(days, closes, new_cases)
        daily = resample_daily(aligned)
        return engineer_features(daily, aligned.epi), daily

    def test_replication_schema_has_37_columns(self):
        frame, _ = self._frame()
        assert len(frame.column_names) == 37
        assert frame.column_names[-1] == TARGET_NAME
        assert len(frame.predictor_names) == 36

    def test_target_is_next_day_close(self):
        frame, daily = self._frame()
        assert frame.n_rows == len(daily) - 1
        for i in range(frame.n_rows):
            assert frame.target[i] == daily[i + 1].close

    def test_constant_epi_moments_zeroed(self):
        frame, _ = self._frame(new_cases=[10] * 12)
        for f in ("new_cases", "new_deaths"):
            assert np.all(frame.column(f + "_skew") == 0.0)
            assert np.all(frame.column(f + "_kurt") == 0.0)

    def test_trailing_mean_on_ramp(self):
        frame, _ = self._frame(new_cases=list(range(1, 13)))
        # day index 9 (10th day): trailing 7-day mean of {4..10} = 7
        assert frame.column("new_cases_mean")[9] == pytest.approx(7.0)

    def test_expanding_start(self):
        frame, _ = self._frame(new_cases=list(range(1, 13)))
        assert frame.column("new_cases_mean")[0] == 1.0
        assert frame.column("new_cases_mean")[2] == pytest.approx(2.0)

    def test_deterministic(self):
        f1, _ = self._frame()
        f2, _ = self._frame()
        assert np.array_equal(f1.values, f2.values)

    def test_no_nan(self):
        frame, _ = self._frame()
        assert np.all(np.isfinite(frame.values))

    def test_window_too_small(self):
        days = [date(2020, 1, 6) + timedelta(days=i) for i in range(5)]
        aligned = _aligned(days, {d: [100.0, 101.0] for d in days})
        daily = resample_daily(aligned)
        with pytest.raises(WindowTooSmall):
            engineer_features(daily, aligned.epi, epi_window=3)

    def test_coverage_mismatch(self):
        frame_days = [date(2020, 1, 6), date(2020, 1, 7)]
        aligned = _aligned(frame_days, {d: [100.0] for d in frame_days})
        daily = resample_daily(aligned)
        with pytest.raises(CoverageMismatch):
            engineer_features(daily, aligned.epi[:1])


class TestNormalizer:
    def test_simple_column(self):
        frame = FeatureFrame(
            [date(2020, 1, 6) + timedelta(days=i) for i in range(3)],
            ["a", TARGET_NAME],
            np.array([[1.0, 9], [2.0, 8], [3.0, 7]]),
        )
        norm = fit_normalizer(frame)
        assert norm.params_for("a") == (2.0, 1.0)

    def test_constant_column_rejected(self):
        frame = FeatureFrame(
            [date(2020, 1, 6) + timedelta(days=i) for i in range(3)],
            ["a", TARGET_NAME],
            np.array([[5.0, 9], [5.0, 8], [5.0, 7]]),
        )
        with pytest.raises(ZeroVarianceColumn):
            fit_normalizer(frame)

    def test_train_rows_standardized(self):
        frame = make_frame(50, 4, seed=2)
        norm = fit_normalizer(frame, range(35))
        z = apply_normalizer(norm, frame)
        sub = z.values[:35]
        assert np.allclose(sub.mean(axis=0), 0.0, atol=1e-10)
        assert np.allclose(sub.std(axis=0, ddof=1), 1.0, atol=1e-10)

    def test_roundtrip(self):
        frame = make_frame(20, 3, seed=3)
        norm = fit_normalizer(frame)
        back = invert_normalizer(norm, apply_normalizer(norm, frame))
        assert np.allclose(back.values, frame.values, atol=1e-10)

    def test_direct_formula_oracle(self):
        frame = make_frame(15, 2, seed=4)
        norm = fit_normalizer(frame, range(10))
        z = apply_normalizer(norm, frame)
        for j, name in enumerate(frame.column_names):
            m, s = norm.params_for(name)
            for i in range(frame.n_rows):
                assert z.values[i, j] == pytest.approx((frame.values[i, j] - m) / s, rel=1e-12)

    def test_value_at_mean_is_zero(self):
        frame = make_frame(9, 1, seed=5)
        norm = fit_normalizer(frame)
        mean_a, _ = norm.params_for("f0")
        frame.values[0, 0] = mean_a  # recompute with the stored normalizer
        z = apply_normalizer(norm, frame)
        assert z.values[0, 0] == pytest.approx(0.0, abs=1e-12)

    def test_fit_ignores_test_rows(self):
        frame = make_frame(40, 3, seed=6)
        norm = fit_normalizer(frame, range(28))
        perturbed = make_frame(40, 3, seed=6)
        perturbed.values[30:] += 100.0
        norm2 = fit_normalizer(perturbed, range(28))
        assert np.array_equal(norm.means, norm2.means)
        assert np.array_equal(norm.stds, norm2.stds)

    def test_column_mismatch(self):
        norm = fit_normalizer(make_frame(10, 2, seed=7))
        with pytest.raises(ColumnMismatch):
            apply_normalizer(norm, make_frame(10, 3, seed=7))


class TestSplit:
    def test_244_rows(self):
        frame = make_frame(244, 2)
        tr, va, te = split_chronological(frame, SplitSpec(0.7, 0.1, 0.2))
        assert (tr.n_rows, va.n_rows, te.n_rows) == (170, 24, 50)

    def test_10_rows(self):
        frame = make_frame(10, 2)
        tr, va, te = split_chronological(frame, SplitSpec(0.7, 0.1, 0.2))
        assert (tr.n_rows, va.n_rows, te.n_rows) == (7, 1, 2)

    def test_partition_property(self):
        frame = make_frame(31, 3, seed=9)
        tr, va, te = split_chronological(frame)
        rejoined = np.vstack([tr.values, va.values, te.values])
        assert np.array_equal(rejoined, frame.values)
        assert tr.dates + va.dates + te.dates == frame.dates

    def test_too_few(self):
        with pytest.raises(TooFewRows):
            split_chronological(make_frame(2, 1))

    def test_bad_spec(self):
        with pytest.raises(ValueError):
            SplitSpec(0.5, 0.1, 0.2)
        with pytest.raises(ValueError):
            SplitSpec(0.9, -0.1, 0.2)


class TestPersistence:
    def test_csv_roundtrip(self, tmp_path):
        frame = make_frame(12, 4, seed=11)
        path = tmp_path / "frame.csv"
        save_frame(frame, path, meta={"epi_window": 7})
        loaded = load_frame(path)
        assert loaded.column_names == frame.predictor_names + [TARGET_NAME]
        assert np.array_equal(loaded.target, frame.target)
        assert loaded.dates == frame.dates
        assert (tmp_path / "frame.json").exists()

    def test_schema_names(self):
        assert len(market_column_names()) == 20
        assert len(epi_column_names()) == 16
