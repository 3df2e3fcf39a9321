import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from clamm.gbm import GbmParams, simulate_paths
from clamm.risk import cvar, realized_volatility, return_stats

return_lists = st.lists(
    st.floats(min_value=-0.9, max_value=10.0), min_size=1, max_size=60
)


class TestRealizedVolatility:
    def test_constant_prices(self):
        assert realized_volatility([5.0] * 10) == 0.0

    def test_alternating_prices_hand_value(self):
        # 30 daily log returns of +-0.01: sqrt(365 * 0.0001) = 0.1910...
        prices = [1.0]
        for i in range(30):
            prices.append(prices[-1] * math.exp(0.01 if i % 2 == 0 else -0.01))
        assert realized_volatility(prices) == pytest.approx(math.sqrt(365 * 1e-4), rel=1e-12)
        assert realized_volatility(prices) == pytest.approx(0.1910, abs=5e-5)

    def test_needs_two_prices(self):
        with pytest.raises(ValueError):
            realized_volatility([1.0])
        with pytest.raises(ValueError):
            realized_volatility([])

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            realized_volatility([1.0, 0.0, 2.0])

    @given(st.lists(st.floats(min_value=0.01, max_value=100.0), min_size=2, max_size=40),
           st.floats(min_value=0.01, max_value=1000.0))
    def test_invariant_under_rescaling(self, prices, c):
        scaled = [c * p for p in prices]
        assert realized_volatility(scaled) == pytest.approx(
            realized_volatility(prices), rel=1e-9, abs=1e-12
        )

    def test_recovers_gbm_sigma(self):
        # 1000 simulated 30-day series; the estimator mean lands within 10%
        paths = simulate_paths(GbmParams(mu=0.0, sigma=0.7, horizon_days=30, n_paths=1000, seed=12))
        estimates = [realized_volatility(row) for row in paths.prices]
        assert np.mean(estimates) == pytest.approx(0.7, rel=0.10)


class TestReturnStats:
    def test_constant_returns(self):
        s = return_stats([0.007, 0.007, 0.007])
        assert s.mean_daily == pytest.approx(0.007, rel=1e-15)
        assert s.vol_daily == 0.0

    def test_two_point_sample_sd(self):
        s = return_stats([0.01, -0.01])
        assert s.mean_daily == 0.0
        assert s.vol_daily == pytest.approx(math.sqrt(2) * 0.01, rel=1e-12)
        assert s.vol_daily == pytest.approx(0.01414, abs=5e-6)

    def test_four_point_example(self):
        s = return_stats([0.02, 0.0, 0.01, -0.01])
        assert s.mean_daily == pytest.approx(0.005, rel=1e-12)
        assert s.vol_daily == pytest.approx(math.sqrt(0.0005 / 3), rel=1e-12)
        assert s.vol_daily == pytest.approx(0.01291, abs=5e-6)

    def test_single_point_vol_is_nan(self):
        s = return_stats([0.01])
        assert s.mean_daily == 0.01
        assert math.isnan(s.vol_daily)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            return_stats([])


class TestCvar:
    def test_single_worst_tail(self):
        returns = [-0.10] + [0.01] * 19
        assert cvar(returns, 0.05) == -0.10

    def test_constant_series_any_level(self):
        for level in (0.01, 0.05, 0.5, 1.0):
            assert cvar([0.003] * 12, level) == pytest.approx(0.003, rel=1e-15)

    def test_level_one_is_mean(self):
        returns = [0.02, -0.01, 0.005, 0.0]
        assert cvar(returns, 1.0) == pytest.approx(np.mean(returns), rel=1e-12)

    def test_ceil_tail_size(self):
        # n=10, level=0.25 -> k=3: mean of the three smallest
        returns = [-0.3, -0.2, -0.1] + [0.05] * 7
        assert cvar(returns, 0.25) == pytest.approx(-0.2, rel=1e-12)

    def test_level_validation(self):
        with pytest.raises(ValueError):
            cvar([0.01], 0.0)
        with pytest.raises(ValueError):
            cvar([0.01], 1.5)
        with pytest.raises(ValueError):
            cvar([], 0.05)

    def test_rejects_returns_at_or_below_minus_one(self):
        with pytest.raises(ValueError):
            cvar([-1.0, 0.1], 0.05)

    @given(return_lists, st.floats(min_value=0.01, max_value=1.0))
    def test_never_exceeds_mean(self, returns, level):
        assert cvar(returns, level) <= np.mean(returns) + 1e-12

    @given(return_lists)
    def test_monotone_in_level(self, returns):
        levels = [0.05, 0.25, 0.5, 1.0]
        values = [cvar(returns, lv) for lv in levels]
        assert all(a <= b + 1e-12 for a, b in zip(values, values[1:]))

    @given(return_lists, st.randoms(use_true_random=False))
    def test_permutation_invariant(self, returns, rnd):
        shuffled = list(returns)
        rnd.shuffle(shuffled)
        assert cvar(shuffled, 0.05) == cvar(returns, 0.05)
        assert return_stats(shuffled).mean_daily == pytest.approx(
            return_stats(returns).mean_daily, rel=1e-12, abs=1e-15
        )

    @given(return_lists, st.floats(min_value=-0.05, max_value=0.05))
    def test_translation_shifts_mean_and_cvar(self, returns, shift):
        if min(returns) + shift <= -1.0:
            return
        shifted = [r + shift for r in returns]
        assert cvar(shifted, 0.05) == pytest.approx(cvar(returns, 0.05) + shift, rel=1e-9, abs=1e-12)
        a, b = return_stats(shifted), return_stats(returns)
        assert a.mean_daily == pytest.approx(b.mean_daily + shift, rel=1e-9, abs=1e-12)
        if len(returns) >= 2:
            assert a.vol_daily == pytest.approx(b.vol_daily, rel=1e-9, abs=1e-12)
