"""Uniform grids, boundary conditions and finite-difference assembly."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .expr import DomainError, evaluate
from .models import GeneratorCoefficients

__all__ = [
    "Grid1D",
    "Grid2D",
    "Dirichlet",
    "ZeroSecondDerivative",
    "BoundaryCondition",
    "Tridiagonal",
    "BandedOperator1D",
    "BandedOperator2D",
    "AssemblyError",
    "Payoff",
    "assemble_1d",
    "assemble_2d",
    "default_boundaries",
    "default_price_domain",
    "default_log_domain",
    "default_w_domain",
    "cell_peclet",
    "weighted_asymmetry",
]


class AssemblyError(ArithmeticError):
    """Non-finite coefficient or unusable grid."""


# ---------------------------------------------------------------------------
# grids

@dataclass(frozen=True, eq=False)
class Grid1D:
    """Uniform nodes in the chart coordinate (``q`` or ``x = ln q``)."""

    lo: float
    hi: float
    n: int
    chart: str = "price"

    def __post_init__(self):
        if self.n < 3:
            raise AssemblyError(f"grid needs at least 3 nodes, got {self.n}")
        if not self.lo < self.hi:
            raise AssemblyError(f"grid bounds must satisfy lo < hi, got ({self.lo}, {self.hi})")
        if self.chart not in ("price", "log"):
            raise ValueError(f"unknown chart {self.chart!r}")
        if self.chart == "price" and self.lo <= 0:
            raise AssemblyError(f"price-chart grid needs lo > 0, got {self.lo}")

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.n - 1)

    @property
    def prices(self) -> np.ndarray:
        """Underlying price at each node."""
        return np.exp(self.nodes) if self.chart == "log" else self.nodes

    def to_chart(self, s):
        return np.log(s) if self.chart == "log" else s


@dataclass(frozen=True, eq=False)
class Grid2D:
    q: Grid1D
    w: Grid1D

    def __post_init__(self):
        if self.q.chart != "price" or self.w.chart != "price":
            raise AssemblyError("2D grids are price-chart on both axes")
        if self.w.lo <= 0:
            raise AssemblyError("w_min must be > 0")

    @property
    def shape(self):
        return (self.q.n, self.w.n)

    def mesh(self):
        return np.meshgrid(self.q.nodes, self.w.nodes, indexing="ij")


def default_price_domain(K: float):
    return (K / 8.0, 8.0 * K)


def default_log_domain(S0: float, sigma: float, T: float):
    half = 6.0 * sigma * math.sqrt(T)
    return (math.log(S0) - half, math.log(S0) + half)


def default_w_domain(w0: float, factor: float = 10.0):
    w_max = factor * w0
    return (0.01 * w_max, w_max)


# ---------------------------------------------------------------------------
# boundary conditions

@dataclass(frozen=True)
class Dirichlet:
    """Prescribed value; ``value(tau, coord)`` with coord the face's other axis (2D)."""

    value: Callable


@dataclass(frozen=True)
class ZeroSecondDerivative:
    """Drop the second derivative at the face and use a one-sided first difference."""


@dataclass(frozen=True)
class BoundaryCondition:
    lower: object
    upper: object
    w_lower: object = None
    w_upper: object = None

    def summary(self) -> str:
        def name(b):
            return type(b).__name__ if b is not None else "-"
        parts = [f"lower={name(self.lower)}", f"upper={name(self.upper)}"]
        if self.w_lower is not None:
            parts += [f"w_lower={name(self.w_lower)}", f"w_upper={name(self.w_upper)}"]
        return ", ".join(parts)


@dataclass(frozen=True)
class Payoff:
    kind: str
    K: float

    def __post_init__(self):
        if self.kind not in ("call", "put"):
            raise ValueError(f"payoff must be 'call' or 'put', got {self.kind!r}")
        if not self.K > 0:
            raise ValueError("strike must be > 0")

    def __call__(self, s):
        if self.kind == "call":
            return np.maximum(s - self.K, 0.0)
        return np.maximum(self.K - s, 0.0)


def _face_rate(gen: GeneratorCoefficients, coords):
    b = dict(zip(gen.variables, coords))
    shape = np.broadcast(*coords).shape
    return np.broadcast_to(np.asarray(-evaluate(gen.a0, b), float), shape)


def default_boundaries(payoff: Payoff, gen: GeneratorCoefficients, grid) -> BoundaryCondition:
    """Far-field values: discounted intrinsic value on the q faces.

    The discount rate at a face is -a0 there (the matched r when the
    potential is the constant rate).  The w faces of a 2D grid use
    :class:`ZeroSecondDerivative`.
    """
    K = payoff.K
    if gen.dimension == 1:
        s_lo, s_hi = grid.prices[0], grid.prices[-1]
        r_lo = float(_face_rate(gen, (np.array(grid.lo),)))
        r_hi = float(_face_rate(gen, (np.array(grid.hi),)))
        if payoff.kind == "call":
            lower = Dirichlet(lambda tau, c=None: 0.0)
            upper = Dirichlet(lambda tau, c=None: s_hi - K * math.exp(-r_hi * tau))
        else:
            lower = Dirichlet(lambda tau, c=None: K * math.exp(-r_lo * tau) - s_lo)
            upper = Dirichlet(lambda tau, c=None: 0.0)
        return BoundaryCondition(lower, upper)

    qg, wg = grid.q, grid.w
    w = wg.nodes
    r_lo = _face_rate(gen, (np.full_like(w, qg.lo), w))
    r_hi = _face_rate(gen, (np.full_like(w, qg.hi), w))
    zero = np.zeros_like(w)
    if payoff.kind == "call":
        lower = Dirichlet(lambda tau, c=None: zero)
        upper = Dirichlet(lambda tau, c=None: qg.hi - K * np.exp(-r_hi * tau))
    else:
        lower = Dirichlet(lambda tau, c=None: K * np.exp(-r_lo * tau) - qg.lo)
        upper = Dirichlet(lambda tau, c=None: zero)
    return BoundaryCondition(lower, upper, ZeroSecondDerivative(), ZeroSecondDerivative())


# ---------------------------------------------------------------------------
# operators

@dataclass(frozen=True, eq=False)
class Tridiagonal:
    """Rows of one or many tridiagonal matrices along the last axis.

    ``lower[..., 0]`` and ``upper[..., -1]`` are unused and kept at zero.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    @property
    def n(self) -> int:
        return self.diag.shape[-1]

    def matvec(self, u: np.ndarray) -> np.ndarray:
        out = self.diag * u
        out[..., 1:] += self.lower[..., 1:] * u[..., :-1]
        out[..., :-1] += self.upper[..., :-1] * u[..., 1:]
        return out

    def to_dense(self) -> np.ndarray:
        if self.diag.ndim != 1:
            raise ValueError("to_dense is for a single system")
        return (np.diag(self.diag) + np.diag(self.lower[1:], -1)
                + np.diag(self.upper[:-1], 1))


@dataclass(frozen=True, eq=False)
class BandedOperator1D:
    op: Tridiagonal
    grid: Grid1D
    bc: BoundaryCondition
    # rows whose value is prescribed (operator row zeroed)
    dirichlet: np.ndarray

    def boundary_values(self, tau: float):
        out = {}
        if isinstance(self.bc.lower, Dirichlet):
            out[0] = float(self.bc.lower.value(tau))
        if isinstance(self.bc.upper, Dirichlet):
            out[self.grid.n - 1] = float(self.bc.upper.value(tau))
        return out


@dataclass(frozen=True, eq=False)
class BandedOperator2D:
    """Split operator: ``Lq`` along axis 0 (one system per w-line, batch axis 1),
    ``Lw`` along axis 1 (one system per q-line), stored with the solve axis last."""

    Lq: Tridiagonal  # arrays of shape (n_w, n_q)
    Lw: Tridiagonal  # arrays of shape (n_q, n_w)
    grid: Grid2D
    bc: BoundaryCondition

    def apply_q(self, u):
        return self.Lq.matvec(u.T).T

    def apply_w(self, u):
        return self.Lw.matvec(u)

    def boundary_rows(self, tau: float):
        """Prescribed values on the q faces as {row index: array over w}."""
        out = {}
        nw = self.grid.w.n
        for idx, b in ((0, self.bc.lower), (self.grid.q.n - 1, self.bc.upper)):
            if isinstance(b, Dirichlet):
                out[idx] = np.broadcast_to(np.asarray(b.value(tau), float), (nw,))
        return out


def _coeff(e, bindings, shape, name):
    try:
        v = np.broadcast_to(np.asarray(evaluate(e, bindings), float), shape)
    except DomainError as exc:
        raise AssemblyError(f"coefficient {name} cannot be evaluated on the grid: {exc}") from exc
    bad = ~np.isfinite(v)
    if bad.any():
        idx = tuple(int(i[0]) for i in np.nonzero(bad))
        raise AssemblyError(f"non-finite coefficient {name} at grid index {idx}")
    return np.array(v)


def _line_stencil(c2, c1, c0, h, lower_bc, upper_bc):
    """Central three-point rows along the last axis with boundary rows per BC."""
    lower = c2 / h**2 - c1 / (2 * h)
    diag = -2 * c2 / h**2 + c0
    upper = c2 / h**2 + c1 / (2 * h)
    for side, bc in ((0, lower_bc), (-1, upper_bc)):
        if isinstance(bc, Dirichlet):
            lower[..., side] = 0.0
            diag[..., side] = 0.0
            upper[..., side] = 0.0
        elif isinstance(bc, ZeroSecondDerivative):
            if side == 0:
                lower[..., 0] = 0.0
                diag[..., 0] = -c1[..., 0] / h + c0[..., 0]
                upper[..., 0] = c1[..., 0] / h
            else:
                lower[..., -1] = -c1[..., -1] / h
                diag[..., -1] = c1[..., -1] / h + c0[..., -1]
                upper[..., -1] = 0.0
        else:
            raise AssemblyError(f"unsupported boundary condition {bc!r}")
    lower[..., 0] = 0.0
    upper[..., -1] = 0.0
    return Tridiagonal(lower, diag, upper)


def assemble_1d(gen: GeneratorCoefficients, grid: Grid1D, bc: BoundaryCondition) -> BandedOperator1D:
    """Interior row i: a2(q_i) D2 + a1(q_i) D1 + a0(q_i)."""
    if gen.dimension != 1:
        raise AssemblyError("assemble_1d needs a one-dimensional generator")
    expected = "x" if grid.chart == "log" else "q"
    if gen.variables != (expected,):
        raise AssemblyError(f"generator variables {gen.variables} do not match the {grid.chart} chart")
    b = {expected: grid.nodes}
    shape = (grid.n,)
    c2 = _coeff(gen.a2, b, shape, "a2")
    c1 = _coeff(gen.a1, b, shape, "a1")
    c0 = _coeff(gen.a0, b, shape, "a0")
    op = _line_stencil(c2, c1, c0, grid.spacing, bc.lower, bc.upper)
    mask = np.zeros(grid.n, bool)
    mask[0] = isinstance(bc.lower, Dirichlet)
    mask[-1] = isinstance(bc.upper, Dirichlet)
    return BandedOperator1D(op, grid, bc, mask)


def assemble_2d(gen: GeneratorCoefficients, grid: Grid2D, bc: BoundaryCondition) -> BandedOperator2D:
    """Per-axis operators; a0 is split evenly between the q and w sweeps."""
    if gen.dimension != 2:
        raise AssemblyError("assemble_2d needs a two-dimensional generator")
    q, w = grid.mesh()
    b = {"q": q, "w": w}
    shape = grid.shape
    a2 = _coeff(gen.a2, b, shape, "a2")
    a1 = _coeff(gen.a1, b, shape, "a1")
    b2 = _coeff(gen.b2, b, shape, "b2")
    b1 = _coeff(gen.b1, b, shape, "b1")
    half0 = 0.5 * _coeff(gen.a0, b, shape, "a0")

    Lq = _line_stencil(a2.T.copy(), a1.T.copy(), half0.T.copy(), grid.q.spacing, bc.lower, bc.upper)
    Lw = _line_stencil(b2, b1, half0.copy(), grid.w.spacing, bc.w_lower, bc.w_upper)
    # q-face nodes carry prescribed values: no w-direction dynamics there
    for i, face in ((0, bc.lower), (-1, bc.upper)):
        if isinstance(face, Dirichlet):
            Lw.lower[i] = 0.0
            Lw.diag[i] = 0.0
            Lw.upper[i] = 0.0
    return BandedOperator2D(Lq, Lw, grid, bc)


# ---------------------------------------------------------------------------
# diagnostics

def cell_peclet(gen: GeneratorCoefficients, grid) -> float:
    """max |a1| dx / (2 a2) over the grid (and |b1| dw / (2 b2) in 2D)."""
    if gen.dimension == 1:
        c = gen.evaluate(grid.nodes)
        return float(np.max(np.abs(c["a1"]) * grid.spacing / (2 * c["a2"])))
    c = gen.evaluate(*grid.mesh())
    pq = np.abs(c["a1"]) * grid.q.spacing / (2 * c["a2"])
    pw = np.abs(c["b1"]) * grid.w.spacing / (2 * c["b2"])
    return float(max(pq.max(), pw.max()))


def weighted_asymmetry(op: BandedOperator1D, h_values: np.ndarray) -> float:
    """max |W L - (W L)^T| over interior rows/columns, W = diag(dq / h(q_i)).

    The kinetic part h d/dq (h d/dq) is symmetric with respect to the
    volume weights 1/h, so this vanishes up to rounding.
    """
    L = op.op.to_dense()[1:-1, 1:-1]
    W = op.grid.spacing / np.asarray(h_values)[1:-1]
    WL = W[:, None] * L
    return float(np.max(np.abs(WL - WL.T)))
