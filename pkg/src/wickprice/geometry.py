"""Laplace-Beltrami coefficients for diagonal metrics and their deformations.

A one-dimensional metric enters in factored form, g^11 = h(q)^2, so the
operator is h d/dq (h d/dq) = h^2 d2/dq2 + h h' d/dq.  Two-dimensional
metrics are diagonal, g^11(q, w) and g^22(q, w), and the operator is

    sqrt(g11 g22) * [d/dq (g11 / sqrt(g11 g22) d/dq) + d/dw (g22 / sqrt(g11 g22) d/dw)]

expanded into A d2/dq2 + B d2/dw2 + C d/dq + D d/dw.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .expr import (Expr, const, differentiate, evaluate, make_add, make_div, make_func,
                   make_mul, make_pow, var, variables_of)

__all__ = [
    "PositivityError",
    "MetricFactor1D",
    "DiagonalMetric2D",
    "DeformationSpec",
    "lb_coefficients_1d",
    "lb_coefficients_2d",
    "deformed_factor_1d",
    "deformation_factor",
    "mg_metric",
    "eta_potential_terms",
    "sample_interval",
    "SAMPLES_PER_AXIS",
]

SAMPLES_PER_AXIS = 1000

Interval = Tuple[float, float]


class PositivityError(ValueError):
    """A metric component or deformation factor is not positive on its domain."""


def sample_interval(lo: float, hi: float, n: int = SAMPLES_PER_AXIS) -> np.ndarray:
    return np.linspace(lo, hi, n)


def _check_interval(name: str, dom: Interval, positive: bool = True):
    lo, hi = map(float, dom)
    if not lo < hi:
        raise ValueError(f"{name}: empty interval ({lo}, {hi})")
    if positive and lo <= 0.0:
        raise ValueError(f"{name}: lower bound must be > 0, got {lo}")
    return lo, hi


def _min_on(e: Expr, bindings) -> float:
    vals = np.broadcast_to(evaluate(e, bindings), np.broadcast(*bindings.values()).shape)
    return float(np.min(vals))


@dataclass(frozen=True)
class MetricFactor1D:
    """Square root h of the inverse metric g^11 = h(q)^2 on (lo, hi)."""

    h: Expr
    domain: Interval
    var: str = "q"

    def __post_init__(self):
        lo, hi = _check_interval("MetricFactor1D.domain", self.domain)
        object.__setattr__(self, "domain", (lo, hi))
        stray = variables_of(self.h) - {self.var}
        if stray:
            raise ValueError(f"metric factor depends on undeclared variables {sorted(stray)}")
        m = _min_on(self.h, {self.var: sample_interval(lo, hi)})
        if not m > 0.0:
            raise PositivityError(f"metric factor h = {self.h} reaches {m:g} <= 0 on {self.domain}")


@dataclass(frozen=True)
class DiagonalMetric2D:
    g11: Expr
    g22: Expr
    q_domain: Interval
    w_domain: Interval
    vars: Tuple[str, str] = ("q", "w")

    def __post_init__(self):
        qd = _check_interval("q_domain", self.q_domain)
        wd = _check_interval("w_domain", self.w_domain)
        object.__setattr__(self, "q_domain", qd)
        object.__setattr__(self, "w_domain", wd)
        q, w = np.meshgrid(sample_interval(*qd), sample_interval(*wd), indexing="ij")
        b = {self.vars[0]: q, self.vars[1]: w}
        for name, comp in (("g11", self.g11), ("g22", self.g22)):
            m = _min_on(comp, b)
            if not m > 0.0:
                raise PositivityError(f"metric component {name} = {comp} reaches {m:g} <= 0")


@dataclass(frozen=True)
class DeformationSpec:
    """Noncommutativity data: theta with f(q) [and g(w)], eta for [p, k]."""

    theta: float = 0.0
    f: Expr = field(default_factory=lambda: const(0.0))
    g: Optional[Expr] = None
    eta: float = 0.0

    def check(self, q_domain: Interval, w_domain: Optional[Interval] = None):
        q = sample_interval(*q_domain)
        m = _min_on(deformation_factor(self.theta, self.f), {"q": q})
        if not m > 0.0:
            raise PositivityError(
                f"1 + theta*f(q) reaches {m:g} <= 0 on {tuple(q_domain)} (theta={self.theta})")
        if w_domain is not None and self.g is not None:
            w = sample_interval(*w_domain)
            m = _min_on(deformation_factor(self.theta, self.g), {"w": w})
            if not m > 0.0:
                raise PositivityError(
                    f"1 + theta*g(w) reaches {m:g} <= 0 on {tuple(w_domain)} (theta={self.theta})")


def deformation_factor(theta: float, f: Expr) -> Expr:
    """1 + theta*f, folding to the constant 1 when theta == 0."""
    return make_add(const(1.0), make_mul(const(theta), f))


def lb_coefficients_1d(m: MetricFactor1D) -> Tuple[Expr, Expr]:
    """(a2, a1) = (h^2, h h') for the operator h d/dq (h d/dq)."""
    a2 = make_pow(m.h, 2)
    a1 = make_mul(m.h, differentiate(m.h, m.var))
    return a2, a1


def lb_coefficients_2d(m: DiagonalMetric2D) -> Tuple[Expr, Expr, Expr, Expr]:
    q, w = m.vars
    root = make_func("sqrt", make_mul(m.g11, m.g22))
    c = make_mul(root, differentiate(make_div(m.g11, root), q))
    d = make_mul(root, differentiate(make_div(m.g22, root), w))
    return m.g11, m.g22, c, d


def deformed_factor_1d(base: MetricFactor1D, d: DeformationSpec) -> MetricFactor1D:
    """h_theta(q) = q (1 + theta f(q)) from the flat-chart momentum shift."""
    if base.h != var(base.var):
        raise ValueError("deformation is defined for the base factor h = q")
    d.check(base.domain)
    return MetricFactor1D(make_mul(base.h, deformation_factor(d.theta, d.f)),
                          base.domain, base.var)


def mg_metric(xi: float, q_domain: Interval, w_domain: Interval,
              deformation: Optional[DeformationSpec] = None) -> DiagonalMetric2D:
    """g^11 = w h_q^2 and g^22 = 2 xi^2 h_w^2.

    Undeformed, h_q = q and h_w = w.  With a deformation, h_q = q (1 + theta f(q))
    and h_w = w (1 + theta g(w)).
    """
    hq, hw = var("q"), var("w")
    if deformation is not None:
        deformation.check(q_domain, w_domain)
        g = deformation.g if deformation.g is not None else const(0.0)
        hq = make_mul(hq, deformation_factor(deformation.theta, deformation.f))
        hw = make_mul(hw, deformation_factor(deformation.theta, g))
    g11 = make_mul(var("w"), make_pow(hq, 2))
    g22 = make_mul(const(2.0 * xi * xi), make_pow(hw, 2))
    return DiagonalMetric2D(g11, g22, q_domain, w_domain)


def eta_potential_terms(xi: float, eta: float) -> Tuple[Expr, Expr]:
    """Extra terms from the momentum shift p -> p + eta*w in q^2 w p^2 / 2.

    Returns (coefficient of p, scalar term) = (eta q^2 w^2, eta^2 q^2 w^3 / 2).
    """
    q, w = var("q"), var("w")
    q2 = make_pow(q, 2)
    lin = make_mul(const(eta), make_mul(q2, make_pow(w, 2)))
    scalar = make_mul(const(0.5 * eta * eta), make_mul(q2, make_pow(w, 3)))
    return lin, scalar
