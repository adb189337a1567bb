"""
Tests for series_core: tick grid, returns and volatility estimators.

Run with: pytest tests/test_series_core.py -v
"""

import math

import numpy as np
import pytest


def _naive_hist_var(x, horizon, granularity, t):
    """σ_h(t)² straight from the definition, t is a position in x."""
    n = horizon - granularity + 1
    total = 0.0
    for k in range(n):
        r = x[t - k] - x[t - k - granularity]
        total += r * r
    return 175_200 / granularity * total / n


class TestTickHelpers:
    """Tick conversions and duration labels."""

    def test_tick_constants(self):
        from app.utils import TICKS_PER_DAY, TICKS_PER_HOUR, TICKS_PER_YEAR, ticks

        assert TICKS_PER_HOUR == 20
        assert TICKS_PER_DAY == 480
        assert TICKS_PER_YEAR == 175_200
        assert ticks(days=1) == 480
        assert ticks(hours=1, minutes=3) == 21

    def test_ticks_rejects_off_grid_minutes(self):
        from app.utils import ticks

        with pytest.raises(ValueError):
            ticks(minutes=4)

    @pytest.mark.parametrize(
        ("count", "label"),
        [(8, "24min"), (20, "1h"), (480, "1d"), (512, "1d1h36"), (24, "1h12")],
    )
    def test_ticks_to_label(self, count, label):
        from app.utils import ticks_to_label

        assert ticks_to_label(count) == label


class TestRegularSeries:
    """Construction and windowing of regular series."""

    def test_rejects_non_finite(self):
        from app.services.series_core import RegularSeries

        with pytest.raises(ValueError):
            RegularSeries(0, [0.0, float("nan")])

    def test_rejects_negative_volatility(self):
        from app.services.series_core import RegularSeries, SeriesKind

        with pytest.raises(ValueError):
            RegularSeries(0, [0.1, -0.1], SeriesKind.VOLATILITY)

    def test_values_are_read_only(self):
        from app.services.series_core import RegularSeries

        series = RegularSeries(5, [1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            series.values[0] = 10.0
        assert series.end_index == 7

    def test_window_outside_raises(self):
        from app.errors import SeriesTooShort
        from app.services.series_core import RegularSeries

        series = RegularSeries(5, [1.0, 2.0, 3.0])
        assert series.window(6, 7).tolist() == [2.0, 3.0]
        with pytest.raises(SeriesTooShort):
            series.window(4, 6)


class TestReturns:
    """Returns at a fixed horizon."""

    def test_one_tick_returns(self):
        from app.services.series_core import RegularSeries, SeriesKind, returns

        r = returns(RegularSeries(0, [0.0, 0.1, 0.3]), 1)
        assert r.kind is SeriesKind.RETURN
        assert r.start_index == 1
        assert r.values == pytest.approx([0.1, 0.2])

    def test_too_short_for_horizon(self):
        from app.errors import SeriesTooShort
        from app.services.series_core import RegularSeries, returns

        with pytest.raises(SeriesTooShort):
            returns(RegularSeries(0, [0.0, 0.1]), 2)

    def test_zero_horizon_is_invalid(self):
        from app.errors import InvalidDuration
        from app.services.series_core import RegularSeries, returns

        with pytest.raises(InvalidDuration):
            returns(RegularSeries(0, [0.0, 0.1]), 0)


class TestVolSpec:
    """Volatility estimator parameters."""

    def test_granularity_above_horizon(self):
        from app.errors import InvalidDuration
        from app.services.series_core import VolSpec

        with pytest.raises(InvalidDuration):
            VolSpec(horizon=4, granularity=8)
        with pytest.raises(InvalidDuration):
            VolSpec(horizon=4, granularity=0)

    def test_coupled_default_ratio(self):
        from app.services.series_core import VolSpec

        assert VolSpec.coupled(480) == VolSpec(480, 20)
        assert VolSpec.coupled(8).granularity == 1
        assert VolSpec(480, 20).term_count == 461


class TestVolatility:
    """Historical and realized volatility."""

    def test_constant_series_has_zero_volatility(self):
        from app.services.series_core import RegularSeries, VolSpec, historical_vol

        vol = historical_vol(RegularSeries(0, np.full(100, 4.2)), VolSpec(10, 2))
        assert np.all(vol.values == 0.0)
        assert vol.start_index == 10

    def test_gaussian_walk_annualized_level(self, gaussian_prices):
        from app.services.series_core import VolSpec, historical_vol

        vol = historical_vol(gaussian_prices, VolSpec(4800, 1))
        assert np.mean(vol.values ** 2) == pytest.approx(0.01, rel=0.05)

    def test_shift_identity_is_exact(self, rng):
        from app.services.series_core import RegularSeries, VolSpec, historical_vol, realized_vol

        for _ in range(10):
            start = int(rng.integers(-500, 500))
            x = np.cumsum(rng.standard_normal(int(rng.integers(300, 2000))) * 1e-3)
            horizon = int(rng.integers(2, 200))
            spec = VolSpec(horizon, int(rng.integers(1, horizon + 1)))
            prices = RegularSeries(start, x)
            hist = historical_vol(prices, spec)
            real = realized_vol(prices, spec)
            assert real.start_index == start
            for t in range(real.start_index, real.end_index + 1, 37):
                assert real.window(t, t)[0] == hist.window(t + horizon, t + horizon)[0]

    def test_matches_naive_definition(self, rng):
        from app.services.series_core import RegularSeries, VolSpec, historical_vol, realized_vol

        x = np.cumsum(rng.standard_normal(400) * 1e-3)
        prices = RegularSeries(0, x)
        for spec in (VolSpec(10, 1), VolSpec(24, 4), VolSpec(50, 50)):
            hist = historical_vol(prices, spec)
            real = realized_vol(prices, spec)
            for t in range(hist.start_index, hist.end_index + 1):
                assert hist.window(t, t)[0] ** 2 == pytest.approx(
                    _naive_hist_var(x, spec.horizon, spec.granularity, t), rel=1e-10, abs=1e-12
                )
            for t in range(real.start_index, real.end_index + 1):
                assert real.window(t, t)[0] ** 2 == pytest.approx(
                    _naive_hist_var(x, spec.horizon, spec.granularity, t + spec.horizon), rel=1e-10, abs=1e-12
                )

    def test_series_shorter_than_horizon(self):
        from app.errors import SeriesTooShort
        from app.services.series_core import RegularSeries, VolSpec, historical_vol

        with pytest.raises(SeriesTooShort):
            historical_vol(RegularSeries(0, np.zeros(10)), VolSpec(10, 1))

    def test_affine_series_has_constant_volatility(self):
        from app.services.series_core import RegularSeries, VolSpec, historical_vol

        vol = historical_vol(RegularSeries(0, 0.001 * np.arange(5_000)), VolSpec(96, 4))
        assert np.ptp(vol.values) <= 1e-11 * vol.values.max()

    def test_quiet_stretch_after_loud_stretch(self, rng):
        from app.services.series_core import RegularSeries, VolSpec, historical_vol

        r = np.concatenate([1e-2 * rng.standard_normal(50_000), 1e-5 * rng.standard_normal(50_000)])
        x = np.cumsum(r)
        spec = VolSpec(96, 4)
        hist = historical_vol(RegularSeries(0, x), spec)
        for t in range(60_000, 100_000, 997):
            assert hist.window(t, t)[0] ** 2 == pytest.approx(
                _naive_hist_var(x, spec.horizon, spec.granularity, t), rel=1e-8
            )


class TestSlidingSum:
    """Window sums behind the volatility estimators."""

    @pytest.mark.parametrize("n", [1, 3, 7, 50])
    def test_matches_window_by_window_sum(self, rng, n):
        from app.services.series_core import sliding_sum

        v = rng.random(203)
        expected = [v[i:i + n].sum() for i in range(v.size - n + 1)]
        assert sliding_sum(v, n) == pytest.approx(expected, rel=1e-12)

    def test_window_longer_than_input(self):
        from app.errors import SeriesTooShort
        from app.services.series_core import sliding_sum

        with pytest.raises(SeriesTooShort):
            sliding_sum(np.ones(3), 4)


class TestReverse:
    """Time reversal of a series."""

    def test_double_reverse_is_identity(self, rng):
        from app.services.series_core import RegularSeries, reverse

        series = RegularSeries(3, rng.standard_normal(50))
        assert reverse(reverse(series)).equals(series)

    def test_mirror_tick(self):
        from app.services.series_core import RegularSeries, mirror_tick, reverse

        series = RegularSeries(10, [1.0, 2.0, 3.0, 4.0])
        rev = reverse(series)
        assert rev.start_index == 10
        assert mirror_tick(series, 10) == 13
        assert rev.window(11, 11)[0] == series.window(12, 12)[0]


class TestPearson:
    """Product-moment correlation."""

    def test_perfect_correlation(self):
        from app.services.series_core import pearson

        x = np.arange(10.0)
        assert pearson(x, 2 * x + 1) == pytest.approx(1.0)
        assert pearson(x, -x) == pytest.approx(-1.0)

    def test_constant_input_raises(self):
        from app.errors import ZeroVariance
        from app.services.series_core import pearson

        with pytest.raises(ZeroVariance):
            pearson(np.ones(5), np.arange(5.0))

    def test_length_checks(self):
        from app.errors import LengthMismatch, SeriesTooShort
        from app.services.series_core import pearson

        with pytest.raises(LengthMismatch):
            pearson(np.arange(3.0), np.arange(4.0))
        with pytest.raises(SeriesTooShort):
            pearson([1.0], [2.0])

    def test_nearly_constant_input_raises(self):
        from app.errors import ZeroVariance
        from app.services.series_core import pearson

        x = 0.1 + 1e-15 * np.array([0.0, 1.0, -1.0, 2.0, 0.0, 1.0])
        with pytest.raises(ZeroVariance):
            pearson(x, np.arange(6.0))

    def test_invariant_under_positive_affine_maps(self, rng):
        from app.services.series_core import pearson

        for _ in range(20):
            x = rng.standard_normal(200)
            y = 0.5 * x + rng.standard_normal(200)
            a, c = rng.uniform(0.1, 10.0, size=2)
            b, d = rng.uniform(-10.0, 10.0, size=2)
            assert pearson(a * x + b, c * y + d) == pytest.approx(pearson(x, y), abs=1e-12)

    def test_bounded(self, rng):
        from app.services.series_core import pearson

        for _ in range(20):
            x = rng.standard_normal(30)
            assert -1.0 <= pearson(x, x + 1e-12 * rng.standard_normal(30)) <= 1.0


@pytest.fixture
def rng():
    return np.random.default_rng(20070101)


@pytest.fixture
def gaussian_prices(rng):
    from app.services.series_core import RegularSeries

    r = 0.1 / math.sqrt(175_200) * rng.standard_normal(200_000)
    return RegularSeries(0, np.cumsum(r))
