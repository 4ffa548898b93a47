import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wickprice.checks import _base_pairs, chart_defect, reduction_defect
from wickprice.expr import const, evaluate, parse
from wickprice.geometry import PositivityError
from wickprice.models import (ConstraintError, ModelKind, ModelSpec, build_generator,
                              wick_sign_convention)

Q = [(12.5, 800.0)]
QW = [(12.5, 800.0), (0.004, 0.4)]


def coeffs(spec, dom, *coords):
    return build_generator(spec, dom).evaluate(*coords)


class TestBlackScholesFamily:
    def test_bs1_price_chart(self):
        q = np.array([50.0, 100.0, 150.0])
        c = coeffs(ModelSpec("BS1", sigma=0.2), Q, q)
        np.testing.assert_allclose(c["a2"], 0.02 * q**2, rtol=1e-15)
        np.testing.assert_allclose(c["a1"], 0.02 * q, rtol=1e-15)
        np.testing.assert_allclose(c["a0"], -0.02)

    def test_bs1_rate_is_forced(self):
        g = build_generator(ModelSpec("BS1", sigma=0.2), Q)
        assert g.rate == pytest.approx(0.02)
        with pytest.raises(ConstraintError):
            build_generator(ModelSpec("BS1", sigma=0.2, r=0.05), Q)

    def test_bs1_exploratory_potential(self):
        c = coeffs(ModelSpec("BS1", sigma=0.2, r=0.05, U=const(0.05)), Q, np.array([100.0]))
        np.testing.assert_allclose(c["a0"], -0.05)

    def test_bs2_matching(self):
        q = np.array([80.0, 100.0])
        c = coeffs(ModelSpec("BS2", sigma=0.2, r=0.05), Q, q)
        # alpha = r - sigma^2/2 = 0.03, so a1 = 0.02 q + 0.03 q
        np.testing.assert_allclose(c["a1"], 0.05 * q, rtol=1e-14)
        np.testing.assert_allclose(c["a0"], -0.05)

    def test_bs2_log_chart(self):
        c = coeffs(ModelSpec("BS2", sigma=0.2, r=0.05, chart="log"), [(2.0, 7.0)], np.array([4.6]))
        np.testing.assert_allclose([c["a2"][0], c["a1"][0], c["a0"][0]], [0.02, 0.03, -0.05],
                                   rtol=1e-14)

    def test_bs2_exploratory_adds_alpha_squared(self):
        c = coeffs(ModelSpec("BS2", sigma=0.2, alpha=0.1, U=const(0.01)), Q, np.array([100.0]))
        np.testing.assert_allclose(c["a0"], -(0.01 + 0.5 * 0.01))

    def test_ncbs1_coefficients(self):
        theta = 0.01
        q = np.array([50.0, 100.0, 200.0])
        c = coeffs(ModelSpec("NCBS1", sigma=0.2, theta=theta, f=parse("q/100", {"q"})), Q, q)
        h = q * (1 + theta * q / 100)
        dh = 1 + 2 * theta * q / 100
        np.testing.assert_allclose(c["a2"], 0.02 * h**2, rtol=1e-14)
        np.testing.assert_allclose(c["a1"], 0.02 * h * dh, rtol=1e-14)

    def test_ncbs2_adds_deformed_velocity_term(self):
        theta = 0.01
        q = np.array([100.0])
        f = parse("q/100", {"q"})
        a = coeffs(ModelSpec("NCBS2", sigma=0.2, r=0.05, theta=theta, f=f), Q, q)
        b = coeffs(ModelSpec("NCBS1", sigma=0.2, theta=theta, f=f), Q, q)
        np.testing.assert_allclose(a["a1"] - b["a1"], 0.03 * q * (1 + theta), rtol=1e-12)

    def test_positivity_of_deformation(self):
        with pytest.raises(PositivityError):
            build_generator(ModelSpec("NCBS1", sigma=0.2, theta=-0.5, f=parse("q/100", {"q"})), Q)


class TestTwoFactor:
    def test_mg_at_reference_point(self):
        c = coeffs(ModelSpec("MG", xi=0.5, r=0.02), QW, np.array([100.0]), np.array([0.04]))
        np.testing.assert_allclose(c["a2"], 0.5 * 100.0**2 * 0.04, rtol=1e-14)
        np.testing.assert_allclose(c["b2"], 0.5 * 2 * 0.25 * 0.04**2, rtol=1e-14)
        np.testing.assert_allclose(c["a1"], 0.5 * 100.0 * 0.04, rtol=1e-12)
        np.testing.assert_allclose(c["b1"], 0.5 * 0.25 * 0.04, rtol=1e-12)
        np.testing.assert_allclose(c["a0"], -0.02)

    def test_eta_terms(self):
        q, w, eta = np.array([90.0]), np.array([0.05]), 1e-3
        a = coeffs(ModelSpec("NCMG_ETA", xi=0.5, r=0.02, eta=eta), QW, q, w)
        b = coeffs(ModelSpec("MG", xi=0.5, r=0.02), QW, q, w)
        np.testing.assert_allclose(a["a1"] - b["a1"], eta * q**2 * w**2, rtol=1e-10)
        np.testing.assert_allclose(a["a0"] - b["a0"], -0.5 * eta**2 * q**2 * w**3, rtol=1e-10)

    def test_rho_rejected(self):
        with pytest.raises(ConstraintError):
            ModelSpec("MG", xi=0.5, r=0.02, rho=0.3)

    def test_match_needs_rate(self):
        with pytest.raises(ConstraintError):
            build_generator(ModelSpec("MG", xi=0.5), QW)


class TestSpecValidation:
    @pytest.mark.parametrize("kind", ["NCBS1", "NCBS2"])
    def test_deformed_models_need_price_chart(self, kind):
        with pytest.raises(ValueError):
            ModelSpec(kind, sigma=0.2, r=0.05, chart="log")

    def test_bad_sigma(self):
        with pytest.raises(ValueError):
            ModelSpec("BS1", sigma=0.0)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            ModelSpec("HESTON", sigma=0.2)

    def test_potential_with_foreign_variable(self):
        with pytest.raises(ValueError):
            build_generator(ModelSpec("BS1", sigma=0.2, U=parse("w", {"w"})), Q)

    def test_domain_count(self):
        with pytest.raises(ValueError):
            build_generator(ModelSpec("MG", xi=0.5, r=0.02), Q)

    def test_kinds(self):
        assert {k.value for k in ModelKind} == {"BS1", "BS2", "NCBS1", "NCBS2", "MG",
                                                 "NCMG_THETA", "NCMG_ETA"}
        assert "tau = T - t" in wick_sign_convention()


class TestReductions:
    @pytest.mark.parametrize("name,a,b", _base_pairs(), ids=[p[0] for p in _base_pairs()])
    def test_reduces_to_base_model(self, name, a, b):
        diff, same = reduction_defect(a, b)
        assert diff < 1e-13
        assert same

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.05, 0.8), st.floats(-0.05, 0.1))
    def test_ncbs2_theta_zero_for_any_parameters(self, sigma, r):
        f = parse("q/100 + q^2/10000", {"q"})
        q = np.linspace(*Q[0], 101)
        a = coeffs(ModelSpec("NCBS2", sigma=sigma, r=r, theta=0.0, f=f), Q, q)
        b = coeffs(ModelSpec("BS2", sigma=sigma, r=r), Q, q)
        for k in a:
            np.testing.assert_array_equal(a[k], b[k])

    def test_charts_agree(self):
        assert chart_defect() < 1e-10

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.05, 0.8), st.floats(0.0, 0.2))
    def test_kinetic_coefficients_are_lb_form(self, sigma, theta):
        # a1 = a2'/2 for the kinetic part of any 1D price-chart model
        spec = ModelSpec("NCBS1", sigma=sigma, theta=theta, f=parse("q/100", {"q"}))
        g = build_generator(spec, Q)
        q = np.linspace(20.0, 700.0, 40)
        eps = 1e-3
        a2 = lambda x: np.asarray(evaluate(g.a2, {"q": x}), float)
        np.testing.assert_allclose(g.evaluate(q)["a1"], (a2(q + eps) - a2(q - eps)) / (4 * eps),
                                   rtol=1e-7)
