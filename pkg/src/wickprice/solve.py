"""Time stepping for the discrete pricing equation.

1D problems use the theta-method (Crank-Nicolson, with implicit-Euler
half-steps at the start to damp the payoff kink).  2D problems use the
Douglas splitting with one implicit tridiagonal sweep per axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.linalg

from .discretize import BandedOperator1D, BandedOperator2D, Grid1D, Grid2D, Tridiagonal

__all__ = [
    "SingularSystemError",
    "NumericalError",
    "TridiagonalFactor",
    "tridiagonal_solve",
    "PriceSurface",
    "evolve_1d",
    "evolve_2d",
    "interpolate",
    "ConvergenceRow",
    "convergence_study",
]

SCHEMES = ("crank-nicolson", "implicit-euler")


class SingularSystemError(np.linalg.LinAlgError):
    pass


class NumericalError(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# tridiagonal systems

def _dominant(lower, diag, upper) -> bool:
    off = np.abs(lower) + np.abs(upper)
    off[..., 0] = np.abs(upper[..., 0])
    off[..., -1] = np.abs(lower[..., -1])
    return bool(np.all(np.abs(diag) >= off) and np.all(diag != 0))


class TridiagonalFactor:
    """Reusable factorization of one or a batch of tridiagonal systems.

    Diagonally dominant systems are factored by the Thomas recursion
    (vectorized over the batch).  Anything else goes through LAPACK's
    banded LU with partial pivoting.
    """

    def __init__(self, lower, diag, upper):
        lower = np.asarray(lower, float)
        diag = np.asarray(diag, float)
        upper = np.asarray(upper, float)
        if not (lower.shape == diag.shape == upper.shape):
            raise ValueError("lower, diag and upper must have the same shape")
        self.shape = diag.shape
        self.n = diag.shape[-1]
        self.pivoting = not _dominant(lower, diag, upper)
        if self.pivoting:
            self._bands = np.zeros(diag.shape[:-1] + (3, self.n))
            self._bands[..., 0, 1:] = upper[..., :-1]
            self._bands[..., 1, :] = diag
            self._bands[..., 2, :-1] = lower[..., 1:]
            return
        n = self.n
        cp = np.empty_like(diag)
        denom = np.empty_like(diag)
        denom[..., 0] = diag[..., 0]
        cp[..., 0] = upper[..., 0] / diag[..., 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            for i in range(1, n):
                denom[..., i] = diag[..., i] - lower[..., i] * cp[..., i - 1]
                cp[..., i] = upper[..., i] / denom[..., i]
        if np.any(denom == 0) or not np.all(np.isfinite(denom)):
            raise SingularSystemError("zero pivot in tridiagonal elimination")
        self._lower = lower
        self._cp = cp
        self._denom = denom
        # plain-float copies make the 1D recursion much faster than ndarray indexing
        if diag.ndim == 1:
            self._l = lower.tolist()
            self._c = cp.tolist()
            self._d = denom.tolist()

    def solve(self, rhs) -> np.ndarray:
        rhs = np.asarray(rhs, float)
        if rhs.shape != self.shape:
            raise ValueError(f"rhs shape {rhs.shape} does not match system {self.shape}")
        if self.pivoting:
            return self._solve_pivoting(rhs)
        n = self.n
        if rhs.ndim == 1:
            l, c, d = self._l, self._c, self._d
            r = rhs.tolist()
            y = [0.0] * n
            y[0] = r[0] / d[0]
            for i in range(1, n):
                y[i] = (r[i] - l[i] * y[i - 1]) / d[i]
            for i in range(n - 2, -1, -1):
                y[i] -= c[i] * y[i + 1]
            return np.array(y)
        y = np.empty_like(rhs)
        y[..., 0] = rhs[..., 0] / self._denom[..., 0]
        for i in range(1, n):
            y[..., i] = (rhs[..., i] - self._lower[..., i] * y[..., i - 1]) / self._denom[..., i]
        for i in range(n - 2, -1, -1):
            y[..., i] -= self._cp[..., i] * y[..., i + 1]
        return y

    def _solve_pivoting(self, rhs):
        bands = self._bands.reshape(-1, 3, self.n)
        flat = rhs.reshape(-1, self.n)
        out = np.empty_like(flat)
        for k in range(flat.shape[0]):
            try:
                out[k] = scipy.linalg.solve_banded((1, 1), bands[k], flat[k], check_finite=True)
            except np.linalg.LinAlgError as exc:
                raise SingularSystemError(f"singular tridiagonal system: {exc}") from exc
        if not np.all(np.isfinite(out)):
            raise SingularSystemError("singular tridiagonal system")
        return out.reshape(rhs.shape)


def tridiagonal_solve(lower, diag, upper, rhs) -> np.ndarray:
    """Solve the tridiagonal system(s) along the last axis.

    ``lower[..., 0]`` and ``upper[..., -1]`` are ignored.

    >>> tridiagonal_solve([0, -1, -1], [2, 2, 2], [-1, -1, 0], [1, 0, 1])
    array([1., 1., 1.])
    """
    lower = np.array(lower, float)
    upper = np.array(upper, float)
    lower[..., 0] = 0.0
    upper[..., -1] = 0.0
    return TridiagonalFactor(lower, diag, upper).solve(rhs)


# ---------------------------------------------------------------------------
# surfaces

@dataclass
class PriceSurface:
    grid: object
    taus: np.ndarray
    values: np.ndarray  # shape (len(taus),) + grid shape
    meta: Dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]

    def at(self, tau: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.taus - tau)))
        if not math.isclose(self.taus[k], tau, rel_tol=1e-9, abs_tol=1e-12):
            raise KeyError(f"tau={tau} is not a stored checkpoint")
        return self.values[k]


def _checkpoint_steps(T, steps, checkpoints):
    want = {0, steps}
    for tau in checkpoints or ():
        if not 0 <= tau <= T:
            raise ValueError(f"checkpoint tau={tau} outside [0, {T}]")
        want.add(int(round(tau / T * steps)))
    return sorted(want)


def _check_finite(u, step):
    if not np.all(np.isfinite(u)):
        raise NumericalError(f"non-finite values after step {step}")


def _theta_system(L: Tridiagonal, dirichlet: np.ndarray, k: float, theta: float):
    """Factor I - theta*k*L with identity rows on prescribed nodes."""
    lower = -theta * k * L.lower
    diag = 1.0 - theta * k * L.diag
    upper = -theta * k * L.upper
    lower[dirichlet] = 0.0
    upper[dirichlet] = 0.0
    diag[dirichlet] = 1.0
    return TridiagonalFactor(lower, diag, upper)


def evolve_1d(op: BandedOperator1D, payoff, T: float, steps: int,
              scheme: str = "crank-nicolson", rannacher_steps: int = 2,
              checkpoints: Optional[Sequence[float]] = None) -> PriceSurface:
    """Integrate dC/dtau = L C from the payoff at tau = 0 to tau = T.

    With ``crank-nicolson`` the first step is replaced by ``rannacher_steps``
    implicit-Euler substeps of equal size (two half-steps by default); set it
    to 0 for plain Crank-Nicolson.  Dirichlet values are refreshed at each new
    tau.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    u = np.array(payoff, float)
    if u.shape != (op.grid.n,):
        raise ValueError(f"payoff has shape {u.shape}, grid has {op.grid.n} nodes")
    T = float(T)
    k = T / steps
    L = op.op
    mask = op.dirichlet
    keep = _checkpoint_steps(T, steps, checkpoints)
    taus, values = [0.0], [u.copy()]

    def set_bc(v, tau):
        for i, val in op.boundary_values(tau).items():
            v[i] = val
        return v

    cn = scheme == "crank-nicolson"
    sub = rannacher_steps if cn and rannacher_steps > 0 else 0
    factors = {}

    def implicit(v, tau_new, dt):
        if ("ie", dt) not in factors:
            factors[("ie", dt)] = _theta_system(L, mask, dt, 1.0)
        rhs = set_bc(v.copy(), tau_new)
        return factors[("ie", dt)].solve(rhs)

    def crank(v, tau_new, dt):
        if ("cn", dt) not in factors:
            factors[("cn", dt)] = _theta_system(L, mask, dt, 0.5)
        rhs = v + 0.5 * dt * L.matvec(v)
        rhs = set_bc(rhs, tau_new)
        return factors[("cn", dt)].solve(rhs)

    tau = 0.0
    for n in range(1, steps + 1):
        if not cn:
            u = implicit(u, n * k, k)
        elif n == 1 and sub:
            for j in range(1, sub + 1):
                u = implicit(u, j * k / sub, k / sub)
        else:
            u = crank(u, n * k, k)
        tau = n * k
        _check_finite(u, n)
        if n in keep:
            taus.append(tau)
            values.append(u.copy())
    meta = {"scheme": scheme, "steps": steps, "rannacher_steps": sub,
            "bc": op.bc.summary(), "dimension": 1}
    return PriceSurface(op.grid, np.array(taus), np.array(values), meta)


def evolve_2d(op: BandedOperator2D, payoff, T: float, steps: int,
              theta: float = 0.5, rannacher_steps: int = 2,
              checkpoints: Optional[Sequence[float]] = None) -> PriceSurface:
    """Douglas splitting, one q-sweep and one w-sweep per step.

    The first step is taken as ``rannacher_steps`` fully implicit (theta = 1)
    Douglas substeps; 0 disables this.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    grid = op.grid
    u = np.array(payoff, float)
    if u.shape != grid.shape:
        raise ValueError(f"payoff has shape {u.shape}, grid is {grid.shape}")
    k = float(T) / steps
    nq = grid.q.n
    qmask = np.zeros(nq, bool)
    for i in op.boundary_rows(0.0):
        qmask[i] = True
    wmask = np.zeros(grid.w.n, bool)
    keep = _checkpoint_steps(float(T), steps, checkpoints)
    taus, values = [0.0], [u.copy()]
    factors = {}

    def systems(dt, th):
        key = (dt, th)
        if key not in factors:
            Lq, Lw = op.Lq, op.Lw
            fq = _theta_system(Lq, np.broadcast_to(qmask, Lq.diag.shape), dt, th)
            fw = _theta_system(Lw, np.broadcast_to(wmask, Lw.diag.shape), dt, th)
            factors[key] = (fq, fw)
        return factors[key]

    def douglas(v, tau_new, dt, th):
        fq, fw = systems(dt, th)
        Aq = op.apply_q(v)
        Aw = op.apply_w(v)
        y0 = v + dt * (Aq + Aw)
        rhs = y0 - th * dt * Aq
        for i, vals in op.boundary_rows(tau_new).items():
            rhs[i, :] = vals
        y1 = fq.solve(rhs.T).T
        rhs = y1 - th * dt * Aw
        return fw.solve(rhs)

    sub = rannacher_steps if rannacher_steps > 0 else 0
    for n in range(1, steps + 1):
        if n == 1 and sub:
            for j in range(1, sub + 1):
                u = douglas(u, j * k / sub, k / sub, 1.0)
        else:
            u = douglas(u, n * k, k, theta)
        _check_finite(u, n)
        if n in keep:
            taus.append(n * k)
            values.append(u.copy())
    meta = {"scheme": "douglas", "theta": theta, "steps": steps, "rannacher_steps": sub,
            "bc": op.bc.summary(), "dimension": 2}
    return PriceSurface(grid, np.array(taus), np.array(values), meta)


# ---------------------------------------------------------------------------
# interpolation

def _bracket(nodes: np.ndarray, x: float):
    lo, hi = nodes[0], nodes[-1]
    if not lo - 1e-12 * abs(lo) <= x <= hi + 1e-12 * abs(hi):
        raise ValueError(f"point {x} outside grid hull [{lo}, {hi}]")
    i = int(np.searchsorted(nodes, x, side="right")) - 1
    i = min(max(i, 0), len(nodes) - 2)
    t = (x - nodes[i]) / (nodes[i + 1] - nodes[i])
    return i, min(max(t, 0.0), 1.0)


def interpolate(surface: PriceSurface, point, tau: Optional[float] = None) -> float:
    """Piecewise-linear (1D) or bilinear (2D) value at ``point``.

    ``point`` is an underlying price S (1D) or (S, w) (2D); in the log chart
    the interpolation is linear in ln S.  ``tau`` defaults to the last slice.
    """
    vals = surface.final if tau is None else surface.at(tau)
    grid = surface.grid
    if isinstance(grid, Grid1D):
        x = float(grid.to_chart(float(point)))
        i, t = _bracket(grid.nodes, x)
        if t == 0.0:
            return float(vals[i])
        if t == 1.0:
            return float(vals[i + 1])
        return float((1 - t) * vals[i] + t * vals[i + 1])
    s, w = map(float, point)
    i, tq = _bracket(grid.q.nodes, s)
    j, tw = _bracket(grid.w.nodes, w)
    v = vals
    return float((1 - tq) * (1 - tw) * v[i, j] + tq * (1 - tw) * v[i + 1, j]
                 + (1 - tq) * tw * v[i, j + 1] + tq * tw * v[i + 1, j + 1])


# ---------------------------------------------------------------------------
# convergence

@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    steps: int
    price: float
    error: float
    ratio: float
    order: float


def convergence_study(price_fn, n_ladder: Sequence[int], steps_ladder: Sequence[int],
                      reference: Optional[float] = None, refine: float = 2.0) -> List[ConvergenceRow]:
    """Errors along a refinement ladder and observed orders log_refine(e_prev / e).

    ``price_fn(n, steps)`` returns a price.  A length-1 ladder is broadcast
    against the other.  Without a ``reference`` the finest two levels give a
    Richardson-extrapolated one (assuming second order).
    """
    ns, ks = list(n_ladder), list(steps_ladder)
    if len(ns) == 1:
        ns = ns * len(ks)
    if len(ks) == 1:
        ks = ks * len(ns)
    if len(ns) != len(ks) or len(ns) < 2:
        raise ValueError("ladders must have equal length >= 2 (or length 1)")
    prices = [float(price_fn(n, k)) for n, k in zip(ns, ks)]
    if reference is None:
        fine, coarse = prices[-1], prices[-2]
        reference = fine + (fine - coarse) / (refine**2 - 1.0)
    rows = []
    prev = None
    for n, k, p in zip(ns, ks, prices):
        err = abs(p - reference)
        if prev is None or err == 0.0 or prev == 0.0:
            ratio = order = float("nan")
        else:
            ratio = prev / err
            order = math.log(ratio) / math.log(refine)
        rows.append(ConvergenceRow(n, k, p, err, ratio, order))
        prev = err
    return rows
