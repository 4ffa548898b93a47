import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wickprice.oracles import (bs_closed_form, gbm_terminal, heat_transform_price, mc_gbm_price,
                               mc_mg_price, norm_cdf)


class TestClosedForm:
    def test_reference_value(self):
        assert bs_closed_form(100.0, 100.0, 0.05, 0.2, 1.0) == pytest.approx(10.4506, abs=1e-4)

    def test_norm_cdf(self):
        assert norm_cdf(0.0) == 0.5
        assert norm_cdf(1.959963984540054) == pytest.approx(0.975, abs=1e-15)

    def test_expiry_limit_is_intrinsic(self):
        assert bs_closed_form(110.0, 100.0, 0.05, 0.2, 1e-12) == pytest.approx(10.0, abs=1e-9)
        assert bs_closed_form(90.0, 100.0, 0.05, 0.2, 1e-12, "put") == pytest.approx(10.0, abs=1e-9)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(20, 300), st.floats(20, 300), st.floats(-0.05, 0.15), st.floats(0.05, 1.0),
           st.floats(0.05, 5.0))
    def test_put_call_parity(self, S, K, r, sigma, T):
        c = bs_closed_form(S, K, r, sigma, T)
        p = bs_closed_form(S, K, r, sigma, T, "put")
        assert abs(c - p - (S - K * math.exp(-r * T))) < 1e-12 * max(S, K)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(50, 150), st.floats(0.05, 0.8), st.floats(0.1, 3.0))
    def test_call_monotone(self, S, sigma, T):
        # non-strict: deep out-of-the-money values underflow to exactly 0
        base = bs_closed_form(S, 100.0, 0.03, sigma, T)
        assert bs_closed_form(S * 1.01, 100.0, 0.03, sigma, T) >= base
        assert bs_closed_form(S, 100.0, 0.03, sigma * 1.05, T) >= base
        assert bs_closed_form(S, 101.0, 0.03, sigma, T) <= base

    def test_bounds(self):
        c = bs_closed_form(100.0, 120.0, 0.02, 0.4, 2.0)
        assert max(0.0, 100.0 - 120.0 * math.exp(-0.04)) <= c <= 100.0

    @pytest.mark.parametrize("args", [(0.0, 100, 0.05, 0.2, 1), (100, 100, 0.05, 0.0, 1),
                                      (100, 100, 0.05, 0.2, 0.0)])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            bs_closed_form(*args)


class TestHeatRoute:
    @pytest.mark.parametrize("kind", ["call", "put"])
    def test_matches_closed_form(self, kind):
        h = heat_transform_price(100.0, 100.0, 0.05, 0.2, 1.0, kind=kind)
        cf = bs_closed_form(100.0, 100.0, 0.05, 0.2, 1.0, kind)
        assert h == pytest.approx(cf, rel=5e-3)

    def test_off_the_money(self):
        h = heat_transform_price(90.0, 100.0, 0.01, 0.3, 0.5, n=600, steps=400)
        assert h == pytest.approx(bs_closed_form(90.0, 100.0, 0.01, 0.3, 0.5), rel=5e-3)


class TestMonteCarloGBM:
    def test_martingale(self):
        st_ = gbm_terminal(100.0, 0.05, 0.2, 1.0, 1_000_000, seed=1)
        disc = math.exp(-0.05) * st_
        se = disc.std(ddof=1) / math.sqrt(disc.size)
        assert abs(disc.mean() - 100.0) < 4 * se

    def test_matches_closed_form(self):
        est = mc_gbm_price(100.0, 100.0, 0.05, 0.2, 1.0, paths=200_000, seed=3)
        assert abs(est.price - bs_closed_form(100.0, 100.0, 0.05, 0.2, 1.0)) < 4 * est.stderr

    def test_zero_volatility_is_exact(self):
        est = mc_gbm_price(100.0, 90.0, 0.05, 0.0, 1.0, paths=2000, seed=0)
        assert est.price == pytest.approx(100.0 - 90.0 * math.exp(-0.05), rel=1e-14)
        assert est.stderr < 1e-12

    def test_reproducible(self):
        a = mc_gbm_price(100.0, 100.0, 0.05, 0.2, 1.0, paths=50_000, seed=9)
        b = mc_gbm_price(100.0, 100.0, 0.05, 0.2, 1.0, paths=50_000, seed=9)
        assert a == b
        c = mc_gbm_price(100.0, 100.0, 0.05, 0.2, 1.0, paths=50_000, seed=10)
        assert c.price != a.price

    def test_paths_are_a_prefix(self):
        # block seeding: the first paths do not depend on how many are drawn
        a = gbm_terminal(100.0, 0.05, 0.2, 1.0, 20_000, seed=4)
        b = gbm_terminal(100.0, 0.05, 0.2, 1.0, 40_000, seed=4)
        np.testing.assert_array_equal(a, b[:20_000])

    def test_stderr_scales_with_paths(self):
        a = mc_gbm_price(100.0, 100.0, 0.05, 0.2, 1.0, paths=25_000, seed=2)
        b = mc_gbm_price(100.0, 100.0, 0.05, 0.2, 1.0, paths=400_000, seed=2)
        assert a.stderr / b.stderr == pytest.approx(4.0, rel=0.1)

    def test_far_out_of_the_money_put_is_zero(self):
        est = mc_gbm_price(100.0, 1.0, 0.05, 0.1, 0.5, paths=10_000, seed=0, kind="put")
        assert est.price == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            mc_gbm_price(100.0, 100.0, 0.05, 0.2, 1.0, paths=10)
        with pytest.raises(ValueError):
            mc_gbm_price(100.0, 100.0, 0.05, -0.2, 1.0)


class TestMonteCarloTwoFactor:
    def test_frozen_volatility_matches_gbm(self):
        est = mc_mg_price(100.0, 0.04, 100.0, 0.02, 1e-8, 1.0, paths=100_000, steps=100, seed=5)
        cf = bs_closed_form(100.0, 100.0, 0.02, 0.2, 1.0)
        # Euler bias on q is O(dt); allow it on top of the sampling error
        assert abs(est.price - cf) < 4 * est.stderr + 0.02

    def test_reproducible(self):
        a = mc_mg_price(100.0, 0.04, 100.0, 0.02, 0.5, 1.0, paths=10_000, steps=100, seed=1)
        b = mc_mg_price(100.0, 0.04, 100.0, 0.02, 0.5, 1.0, paths=10_000, steps=100, seed=1)
        assert a == b

    def test_validation(self):
        with pytest.raises(ValueError):
            mc_mg_price(100.0, 0.04, 100.0, 0.02, 0.5, 1.0, paths=10_000, steps=10)
        with pytest.raises(ValueError):
            mc_mg_price(100.0, 0.04, 100.0, 0.02, 0.5, 1.0, paths=100, steps=100)
