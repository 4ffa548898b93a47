"""Catalog of the pricing models and their Wick-rotated generators.

Every model produces a :class:`GeneratorCoefficients`, i.e. the right-hand
side of the forward-in-tau pricing equation

    dC/dtau = a2 C_qq + b2 C_ww + a1 C_q + b1 C_w + a0 C,    tau = T - t,

with coefficient functions held as expression trees.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from .expr import Expr, const, evaluate, make_add, make_mul, make_neg, make_sub, var, variables_of
from .geometry import (DeformationSpec, Interval, MetricFactor1D, deformed_factor_1d,
                       eta_potential_terms, lb_coefficients_1d, lb_coefficients_2d, mg_metric,
                       sample_interval)

__all__ = [
    "ModelKind",
    "ModelSpec",
    "GeneratorCoefficients",
    "ConstraintError",
    "EllipticityError",
    "MATCH_BS",
    "build_generator",
    "wick_sign_convention",
]

MATCH_BS = "match-BS"


class ModelKind(str, enum.Enum):
    BS1 = "BS1"
    BS2 = "BS2"
    NCBS1 = "NCBS1"
    NCBS2 = "NCBS2"
    MG = "MG"
    NCMG_THETA = "NCMG_THETA"
    NCMG_ETA = "NCMG_ETA"

    @property
    def dimension(self) -> int:
        return 2 if self.name.startswith(("MG", "NCMG")) else 1

    @property
    def noncommutative(self) -> bool:
        return self.name.startswith("NC")


class ConstraintError(ValueError):
    """Model parameters violate a matching constraint."""


class EllipticityError(ValueError):
    """A second-order coefficient is not strictly positive on the domain."""


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of one model.

    ``U`` is either an expression in the chart variables or ``"match-BS"``,
    which fixes the potential (and ``alpha`` for BS2/NCBS2) so that the
    generator reproduces the Black-Scholes equation with rate ``r``.
    """

    kind: ModelKind
    sigma: Optional[float] = None
    r: Optional[float] = None
    alpha: float = 0.0
    theta: float = 0.0
    f: Expr = field(default_factory=lambda: const(0.0))
    g: Optional[Expr] = None
    xi: Optional[float] = None
    eta: float = 0.0
    rho: float = 0.0
    U: Union[Expr, str] = MATCH_BS
    chart: str = "price"

    def __post_init__(self):
        kind = ModelKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.chart not in ("price", "log"):
            raise ValueError(f"chart must be 'price' or 'log', got {self.chart!r}")
        if kind.dimension == 2 and self.chart != "price":
            raise ValueError("two-factor models are defined in the price chart only")
        if kind.noncommutative and self.chart != "price":
            raise ValueError("deformed models need the price chart (f(q) is chart specific)")
        if kind.dimension == 1:
            if self.sigma is None or not self.sigma > 0:
                raise ValueError(f"sigma must be > 0 for {kind.value}, got {self.sigma}")
        else:
            if self.xi is None or not self.xi > 0:
                raise ValueError(f"xi must be > 0 for {kind.value}, got {self.xi}")
        if self.rho != 0.0:
            raise ConstraintError("only the rho = 0 subset is supported (no cross term)")
        for name in ("alpha", "theta", "eta"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if isinstance(self.U, str) and self.U != MATCH_BS:
            raise ValueError(f"U must be an expression or {MATCH_BS!r}, got {self.U!r}")

    @property
    def variables(self) -> Tuple[str, ...]:
        if self.kind.dimension == 2:
            return ("q", "w")
        return ("x",) if self.chart == "log" else ("q",)

    def replace(self, **changes) -> "ModelSpec":
        from dataclasses import replace
        return replace(self, **changes)


@dataclass(frozen=True)
class GeneratorCoefficients:
    dimension: int
    variables: Tuple[str, ...]
    a2: Expr
    a1: Expr
    a0: Expr
    b2: Expr = field(default_factory=lambda: const(0.0))
    b1: Expr = field(default_factory=lambda: const(0.0))
    # the constant rate fixed by "match-BS", when there is one
    rate: Optional[float] = None
    # metric factor h when the kinetic part is h d(h d .) (1D price chart)
    kinetic_factor: Optional[Expr] = None
    kinetic_scale: float = 1.0

    def names(self) -> Sequence[str]:
        return ("a2", "a1", "a0") if self.dimension == 1 else ("a2", "b2", "a1", "b1", "a0")

    def evaluate(self, *coords) -> Dict[str, np.ndarray]:
        """Coefficient arrays at broadcast coordinates (one array per variable)."""
        b = dict(zip(self.variables, coords))
        shape = np.broadcast(*coords).shape
        return {n: np.broadcast_to(np.asarray(evaluate(getattr(self, n), b), float), shape)
                for n in self.names()}

    def apply(self, coords, u, du, d2u, dw=None, d2w=None):
        """Generator action given analytic derivatives of a test function."""
        c = self.evaluate(*coords)
        out = c["a2"] * d2u + c["a1"] * du + c["a0"] * u
        if self.dimension == 2:
            out = out + c["b2"] * d2w + c["b1"] * dw
        return out


def wick_sign_convention() -> str:
    return ("tau = T - t; the payoff is the tau = 0 data and the price is integrated "
            "forward in tau: dC/dtau = a2 C_qq + b2 C_ww + a1 C_q + b1 C_w + a0 C")


def _potential(spec: ModelSpec) -> Expr:
    if isinstance(spec.U, str):
        if spec.r is None:
            raise ConstraintError(f"{spec.kind.value}: U = {MATCH_BS!r} needs r")
        return const(spec.r)
    stray = variables_of(spec.U) - set(spec.variables)
    if stray:
        raise ValueError(f"potential U depends on undeclared variables {sorted(stray)}")
    return spec.U


def _matched_rate_bs1(spec: ModelSpec) -> float:
    r_forced = 0.5 * spec.sigma ** 2
    if spec.r is not None and not math.isclose(spec.r, r_forced, rel_tol=1e-12, abs_tol=1e-15):
        raise ConstraintError(
            f"{spec.kind.value} with U={MATCH_BS!r} requires r = sigma^2/2 = {r_forced:g}, "
            f"got r = {spec.r:g}")
    return r_forced


def _domain_check(gen: GeneratorCoefficients, domain):
    if gen.dimension == 1:
        coords = (sample_interval(*domain[0]),)
    else:
        coords = np.meshgrid(sample_interval(*domain[0]), sample_interval(*domain[1]),
                             indexing="ij")
    c = gen.evaluate(*coords)
    for n in ("a2", "b2") if gen.dimension == 2 else ("a2",):
        m = float(np.min(c[n]))
        if not m > 0.0:
            raise EllipticityError(f"{n} reaches {m:g} <= 0 on the domain")


def build_generator(spec: ModelSpec, domain: Sequence[Interval]) -> GeneratorCoefficients:
    """Coefficients of the Wick-rotated generator of ``spec`` on ``domain``.

    ``domain`` is one interval per chart variable, e.g. ``[(12.5, 800.0)]`` or
    ``[(q_lo, q_hi), (w_lo, w_hi)]``; it is used to certify positivity of the
    deformation and ellipticity by sampling.
    """
    kind = spec.kind
    domain = [tuple(map(float, d)) for d in domain]
    if len(domain) != kind.dimension:
        raise ValueError(f"{kind.value} needs {kind.dimension} domain interval(s)")
    if kind.dimension == 1:
        gen = _build_1d(spec, domain[0])
    else:
        gen = _build_2d(spec, domain[0], domain[1])
    _domain_check(gen, domain)
    return gen


def _build_1d(spec: ModelSpec, dom: Interval) -> GeneratorCoefficients:
    kind = spec.kind
    mass = 0.5 * spec.sigma ** 2  # hbar = 1, m = 1/sigma^2
    match = isinstance(spec.U, str)
    rate = None
    if kind in (ModelKind.BS1, ModelKind.NCBS1):
        alpha = 0.0
        if match:
            rate = _matched_rate_bs1(spec)
            u_eff = const(rate)
        else:
            u_eff = _potential(spec)
    else:
        if match:
            if spec.r is None:
                raise ConstraintError(f"{kind.value}: U = {MATCH_BS!r} needs r")
            rate = float(spec.r)
            alpha = rate - mass
            u_eff = const(rate)
        else:
            alpha = float(spec.alpha)
            u_eff = make_add(_potential(spec), const(0.5 * alpha * alpha))
    a0 = make_neg(u_eff)

    if spec.chart == "log":
        a2 = const(mass)
        a1 = const(alpha)
        return GeneratorCoefficients(1, ("x",), a2, a1, a0, rate=rate)

    base = MetricFactor1D(var("q"), dom)
    if kind.noncommutative:
        h = deformed_factor_1d(base, DeformationSpec(spec.theta, spec.f))
    else:
        h = base
    k2, k1 = lb_coefficients_1d(h)
    a2 = make_mul(const(mass), k2)
    a1 = make_mul(const(mass), k1)
    # q-left ordering of the velocity term: alpha * q (1 + theta f) d/dq
    a1 = make_add(a1, make_mul(const(alpha), h.h))
    return GeneratorCoefficients(1, ("q",), a2, a1, a0, rate=rate,
                                 kinetic_factor=h.h, kinetic_scale=mass)


def _build_2d(spec: ModelSpec, qd: Interval, wd: Interval) -> GeneratorCoefficients:
    kind = spec.kind
    deformation = None
    if kind is ModelKind.NCMG_THETA:
        deformation = DeformationSpec(spec.theta, spec.f,
                                      spec.g if spec.g is not None else const(0.0))
    metric = mg_metric(spec.xi, qd, wd, deformation)
    A, B, C, D = lb_coefficients_2d(metric)
    half = const(0.5)
    a2, b2 = make_mul(half, A), make_mul(half, B)
    a1, b1 = make_mul(half, C), make_mul(half, D)
    a0 = make_neg(_potential(spec))
    rate = float(spec.r) if isinstance(spec.U, str) else None
    if kind is ModelKind.NCMG_ETA:
        lin, scalar = eta_potential_terms(spec.xi, spec.eta)
        a1 = make_add(a1, lin)
        a0 = make_sub(a0, scalar)
        if spec.eta != 0.0:
            rate = None
    return GeneratorCoefficients(2, ("q", "w"), a2, a1, a0, b2, b1, rate=rate)
