import numpy as np
import pytest

from wickprice.expr import const, evaluate, parse, var
from wickprice.geometry import (DeformationSpec, DiagonalMetric2D, MetricFactor1D,
                                PositivityError, deformed_factor_1d, eta_potential_terms,
                                lb_coefficients_1d, lb_coefficients_2d, mg_metric)

Q = (12.5, 800.0)
W = (0.004, 0.4)


def ev(e, **b):
    return np.asarray(evaluate(e, b), float)


class TestOneDimensional:
    def test_flat_price_chart(self):
        a2, a1 = lb_coefficients_1d(MetricFactor1D(var("q"), Q))
        q = np.array([20.0, 100.0, 500.0])
        np.testing.assert_array_equal(ev(a2, q=q), q**2)
        np.testing.assert_array_equal(np.broadcast_to(ev(a1, q=q), q.shape), q)

    def test_scaled_factor(self):
        a2, a1 = lb_coefficients_1d(MetricFactor1D(parse("1.5*q", {"q"}), Q))
        q = np.array([20.0, 100.0])
        np.testing.assert_allclose(ev(a2, q=q), 2.25 * q**2, rtol=1e-15)
        np.testing.assert_allclose(ev(a1, q=q), 2.25 * q, rtol=1e-15)

    def test_first_order_coefficient_is_half_derivative_of_second(self):
        h = MetricFactor1D(parse("q*(1 + 0.3*q/100)", {"q"}), Q)
        a2, a1 = lb_coefficients_1d(h)
        q = np.linspace(*Q, 50)
        eps = 1e-4
        da2 = (ev(a2, q=q + eps) - ev(a2, q=q - eps)) / (2 * eps)
        np.testing.assert_allclose(ev(a1, q=q), 0.5 * da2, rtol=1e-7)

    def test_deformation_of_flat_factor(self):
        base = MetricFactor1D(var("q"), Q)
        d = DeformationSpec(theta=0.1, f=parse("q/100", {"q"}))
        h = deformed_factor_1d(base, d)
        np.testing.assert_allclose(ev(h.h, q=200.0), 200.0 * 1.2, rtol=1e-15)

    def test_nonpositive_factor_rejected(self):
        with pytest.raises(PositivityError):
            MetricFactor1D(parse("q - 50", {"q"}), Q)

    def test_deformation_positivity(self):
        d = DeformationSpec(theta=-0.01, f=parse("q", {"q"}))
        with pytest.raises(PositivityError):
            d.check(Q)

    def test_deformation_of_nonflat_base_rejected(self):
        with pytest.raises(ValueError):
            deformed_factor_1d(MetricFactor1D(parse("2*q", {"q"}), Q), DeformationSpec())


def lb_divergence_fd(g11, g22, fq, fw, q, w, rel=1e-3):
    """(1/sqrt g) d_i(sqrt g g^ii d_i f), outer derivatives by a fourth-order
    central stencil; sqrt g = 1/sqrt(g11 g22) for inverse-metric components."""
    def vol(qq, ww):
        return 1.0 / np.sqrt(g11(qq, ww) * g22(qq, ww))

    def d4(fn, x, h):
        return (-fn(x + 2 * h) + 8 * fn(x + h) - 8 * fn(x - h) + fn(x - 2 * h)) / (12 * h)

    hq, hw = rel * q, rel * w
    div_q = d4(lambda qq: vol(qq, w) * g11(qq, w) * fq(qq, w), q, hq)
    div_w = d4(lambda ww: vol(q, ww) * g22(q, ww) * fw(q, ww), w, hw)
    return (div_q + div_w) / vol(q, w)


class TestTwoDimensional:
    xi = 0.5

    def test_mg_tuple_matches_hand_expansion(self):
        A, B, C, D = lb_coefficients_2d(mg_metric(self.xi, Q, W))
        rng = np.random.default_rng(0)
        q, w = rng.uniform(*Q, 200), rng.uniform(*W, 200)
        np.testing.assert_allclose(ev(A, q=q, w=w), q**2 * w, rtol=1e-14)
        np.testing.assert_allclose(ev(B, q=q, w=w), 2 * self.xi**2 * w**2, rtol=1e-14)
        np.testing.assert_allclose(ev(C, q=q, w=w), q * w, rtol=1e-12)
        np.testing.assert_allclose(ev(D, q=q, w=w), self.xi**2 * w, rtol=1e-12)

    def test_divergence_form_oracle(self):
        m = mg_metric(self.xi, Q, W)
        A, B, C, D = lb_coefficients_2d(m)

        def g11(q, w):
            return w * q**2

        def g22(q, w):
            return 2 * self.xi**2 * w**2

        def f(q, w):
            return np.sin(q / 90.0) * np.exp(-w)

        def f_q(q, w):
            return np.cos(q / 90.0) / 90.0 * np.exp(-w)

        def f_w(q, w):
            return -f(q, w)

        q, w = np.array([50.0, 100.0, 300.0]), np.array([0.02, 0.04, 0.2])
        fqq = -np.sin(q / 90.0) / 8100.0 * np.exp(-w)
        sym = (ev(A, q=q, w=w) * fqq + ev(B, q=q, w=w) * f(q, w)
               + ev(C, q=q, w=w) * f_q(q, w) + ev(D, q=q, w=w) * f_w(q, w))
        fd = lb_divergence_fd(g11, g22, f_q, f_w, q, w)
        np.testing.assert_allclose(sym, fd, rtol=1e-6)

    def test_eta_terms_match_momentum_shift_expansion(self):
        # (1/2) q^2 w (p + eta w)^2 = (1/2) q^2 w p^2 + eta q^2 w^2 p + (1/2) eta^2 q^2 w^3
        eta = 0.37
        lin, scalar = eta_potential_terms(self.xi, eta)
        rng = np.random.default_rng(5)
        q, w, p = rng.uniform(*Q, 50), rng.uniform(*W, 50), rng.normal(size=50)
        full = 0.5 * q**2 * w * (p + eta * w) ** 2
        expanded = 0.5 * q**2 * w * p**2 + ev(lin, q=q, w=w) * p + ev(scalar, q=q, w=w)
        np.testing.assert_allclose(expanded, full, rtol=1e-12)

    def test_nonpositive_component_rejected(self):
        with pytest.raises(PositivityError):
            DiagonalMetric2D(parse("w - 0.1", {"q", "w"}), const(1.0), Q, W)

    def test_deformed_mg_metric(self):
        d = DeformationSpec(theta=0.1, f=parse("q/100", {"q"}), g=parse("w/0.04", {"w"}))
        m = mg_metric(self.xi, Q, W, d)
        np.testing.assert_allclose(ev(m.g11, q=100.0, w=0.04), 0.04 * (110.0) ** 2, rtol=1e-14)
        np.testing.assert_allclose(ev(m.g22, q=100.0, w=0.04),
                                   2 * self.xi**2 * (0.044) ** 2, rtol=1e-14)

    def test_bad_interval(self):
        with pytest.raises(ValueError):
            mg_metric(self.xi, (10.0, 5.0), W)
