"""Independent reference prices.

* closed-form Black-Scholes,
* the heat-equation route (log price plus an exponential gauge factor),
* Monte Carlo for geometric Brownian motion (exact terminal sampling),
* Monte Carlo for the two-factor model (Euler-Maruyama).

Random numbers: paths are grouped in fixed blocks of ``MC_BLOCK`` paths and
block ``b`` draws from ``PCG64(SeedSequence(seed, spawn_key=(b,)))``, so every
path's variates are a pure function of (seed, path index) whatever order the
blocks are run in.  Uniforms are mapped to normals by the inverse CDF
(``scipy.special.ndtri``) after shifting them into the open interval (0, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .solve import TridiagonalFactor

__all__ = [
    "McEstimate",
    "norm_cdf",
    "bs_closed_form",
    "heat_transform_price",
    "gbm_terminal",
    "mc_gbm_price",
    "mc_mg_price",
    "MC_BLOCK",
]

MC_BLOCK = 1 << 14


def norm_cdf(x):
    """Standard normal CDF.

    ``scipy.special.ndtr`` evaluates 0.5*erfc(-x/sqrt(2)) from Cephes; its
    absolute error is at the level of double rounding (< 1e-15), far inside
    the 7.5e-8 budget of the classic rational approximations.
    """
    return ndtr(x)


def bs_closed_form(S, K, r, sigma, T, kind="call"):
    if not (S > 0 and K > 0 and sigma > 0 and T > 0):
        raise ValueError("S, K, sigma and T must be > 0")
    if kind not in ("call", "put"):
        raise ValueError(f"kind must be 'call' or 'put', got {kind!r}")
    srt = sigma * math.sqrt(T)
    d1 = (math.log(S / K) + (r + 0.5 * sigma**2) * T) / srt
    d2 = d1 - srt
    disc = K * math.exp(-r * T)
    if kind == "call":
        return float(S * norm_cdf(d1) - disc * norm_cdf(d2))
    return float(disc * norm_cdf(-d2) - S * norm_cdf(-d1))


@dataclass(frozen=True)
class McEstimate:
    price: float
    stderr: float
    paths: int
    steps: int
    seed: int


def _blocks(paths: int):
    b = 0
    start = 0
    while start < paths:
        size = min(MC_BLOCK, paths - start)
        yield b, size
        b += 1
        start += size


def _rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def _normals(rng: np.random.Generator, size) -> np.ndarray:
    u = rng.random(size) + 2.0**-54  # (0, 1)
    return ndtri(u)


def _estimate(samples, disc, paths, steps, seed) -> McEstimate:
    samples = disc * np.asarray(samples)
    mean = float(np.mean(samples))
    se = float(np.std(samples, ddof=1) / math.sqrt(paths)) if paths > 1 else float("nan")
    return McEstimate(mean, se, paths, steps, seed)


def gbm_terminal(S0, r, sigma, T, paths, seed) -> np.ndarray:
    """Exact lognormal samples of S_T under dS = r S dt + sigma S dW."""
    out = []
    drift = (r - 0.5 * sigma**2) * T
    vol = sigma * math.sqrt(T)
    for b, size in _blocks(paths):
        z = _normals(_rng(seed, b), size)
        out.append(S0 * np.exp(drift + vol * z))
    return np.concatenate(out)


def mc_gbm_price(S0, K, r, sigma, T, paths=100_000, seed=0, kind="call") -> McEstimate:
    if paths < 1000:
        raise ValueError("paths must be >= 1000")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    st = gbm_terminal(S0, r, sigma, T, paths, seed)
    pay = np.maximum(st - K, 0.0) if kind == "call" else np.maximum(K - st, 0.0)
    return _estimate(pay, math.exp(-r * T), paths, 1, seed)


def mc_mg_price(S0, w0, K, r, xi, T, paths=100_000, steps=200, seed=0, kind="call",
                w_floor=None) -> McEstimate:
    """Feynman-Kac estimate for the two-factor generator with constant U = r.

        dq = (w/2) q dt + sqrt(w) q dW1,   dw = (xi^2/2) w dt + sqrt(2) xi w dW2,

    independent drivers.  ``w`` is reflected at ``w_floor`` (default: the
    default PDE floor 0.1*w0) when an Euler step takes it below.
    """
    if steps < 100:
        raise ValueError("steps must be >= 100")
    if paths < 10_000:
        raise ValueError("paths must be >= 1e4")
    if w_floor is None:
        w_floor = 0.1 * w0
    dt = T / steps
    sdt = math.sqrt(dt)
    pays = []
    for b, size in _blocks(paths):
        rng = _rng(seed, b)
        q = np.full(size, float(S0))
        w = np.full(size, float(w0))
        for _ in range(steps):
            z = _normals(rng, (2, size))
            sw = np.sqrt(w)
            q_new = q + 0.5 * w * q * dt + sw * q * sdt * z[0]
            w = w + 0.5 * xi * xi * w * dt + math.sqrt(2.0) * xi * w * sdt * z[1]
            w = np.where(w < w_floor, 2.0 * w_floor - w, w)
            q = q_new
        pays.append(np.maximum(q - K, 0.0) if kind == "call" else np.maximum(K - q, 0.0))
    return _estimate(np.concatenate(pays), math.exp(-r * T), paths, steps, seed)


def heat_transform_price(S0, K, r, sigma, T, n=400, steps=400, kind="call",
                         rannacher_steps=2) -> float:
    """Price via psi_tau = (sigma^2/2) psi_xx with C = exp(a x - b tau) psi.

    a = (sigma^2/2 - r)/sigma^2 and b = (sigma^2/2 + r)^2/(2 sigma^2) remove the
    drift and discount terms of the log-price equation.  The heat equation is
    stepped by Crank-Nicolson on x in ln S0 +/- 6 sigma sqrt(T).
    """
    if not (S0 > 0 and K > 0 and sigma > 0 and T > 0):
        raise ValueError("S0, K, sigma and T must be > 0")
    half = 6.0 * sigma * math.sqrt(T)
    x = np.linspace(math.log(S0) - half, math.log(S0) + half, n)
    dx = x[1] - x[0]
    a = (0.5 * sigma**2 - r) / sigma**2
    b = (0.5 * sigma**2 + r) ** 2 / (2.0 * sigma**2)
    s = np.exp(x)
    pay = np.maximum(s - K, 0.0) if kind == "call" else np.maximum(K - s, 0.0)
    psi = np.exp(-a * x) * pay

    def edge(tau):
        if kind == "call":
            c_lo, c_hi = 0.0, s[-1] - K * math.exp(-r * tau)
        else:
            c_lo, c_hi = K * math.exp(-r * tau) - s[0], 0.0
        return (math.exp(-a * x[0] + b * tau) * c_lo, math.exp(-a * x[-1] + b * tau) * c_hi)

    nu = 0.5 * sigma**2 / dx**2
    k = T / steps

    def system(dt, th):
        lo = np.full(n, -th * dt * nu)
        di = np.full(n, 1.0 + 2.0 * th * dt * nu)
        up = np.full(n, -th * dt * nu)
        lo[0] = up[0] = lo[-1] = up[-1] = 0.0
        di[0] = di[-1] = 1.0
        return TridiagonalFactor(lo, di, up)

    def lap(v):
        out = np.zeros_like(v)
        out[1:-1] = nu * (v[2:] - 2.0 * v[1:-1] + v[:-2])
        return out

    ie = system(k / rannacher_steps, 1.0) if rannacher_steps else None
    cn = system(k, 0.5)
    for step in range(1, steps + 1):
        if step == 1 and ie is not None:
            for j in range(1, rannacher_steps + 1):
                rhs = psi.copy()
                rhs[0], rhs[-1] = edge(j * k / rannacher_steps)
                psi = ie.solve(rhs)
        else:
            rhs = psi + 0.5 * k * lap(psi)
            rhs[0], rhs[-1] = edge(step * k)
            psi = cn.solve(rhs)
    c = np.exp(a * x - b * T) * psi
    return float(np.interp(math.log(S0), x, c))
