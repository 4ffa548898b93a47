"""Property suite behind ``wickprice check``.

Each check returns a :class:`CheckResult`; ``run_all`` runs them in a fixed
order.  The same properties are exercised (with their own oracles) by the
pytest suite; this module is what a user runs against an installed build.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, List

import numpy as np

from .discretize import (Grid1D, Grid2D, Payoff, assemble_1d, assemble_2d, default_boundaries,
                         weighted_asymmetry)
from .expr import (DomainError, Expr, const, differentiate, evaluate, make_add, make_div,
                   make_func, make_mul, make_neg, make_pow, make_sub, parse, var)
from .models import ModelSpec, build_generator
from .pricing import Instrument, Numerics, price

__all__ = ["CheckResult", "random_expr", "run_all", "CHECKS"]

Q_DOMAIN = (12.5, 800.0)
W_DOMAIN = (0.004, 0.4)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""


# ---------------------------------------------------------------------------
# random expressions

def random_expr(rng: np.random.Generator, depth: int, name: str = "q") -> Expr:
    """Random tree of depth <= ``depth`` over one variable, built unsimplified
    enough to exercise every node kind.  Arguments of ln/sqrt/div are kept
    away from zero on positive inputs by construction."""
    if depth <= 1 or rng.random() < 0.15:
        if rng.random() < 0.6:
            return var(name)
        return const(round(float(rng.uniform(-2.0, 2.0)), 3))
    kind = rng.choice(["add", "sub", "mul", "div", "pow", "neg", "exp", "ln", "sqrt"])
    a = random_expr(rng, depth - 1, name)
    if kind in ("add", "sub", "mul", "div"):
        b = random_expr(rng, depth - 1, name)
        if kind == "add":
            return make_add(a, b)
        if kind == "sub":
            return make_sub(a, b)
        if kind == "mul":
            return make_mul(a, b)
        return make_div(a, make_add(const(1.0), make_pow(b, 2)))
    if kind == "pow":
        return make_pow(a, int(rng.integers(0, 4)))
    if kind == "neg":
        return make_neg(a)
    if kind == "exp":
        # keep the argument bounded
        return make_func("exp", make_div(a, make_add(const(1.0), make_pow(a, 2))))
    # ln, sqrt of a strictly positive argument
    return make_func(kind, make_add(const(0.5), make_pow(a, 2)))


def derivative_defect(e: Expr, points: np.ndarray, step: float = 1e-5, name: str = "q") -> float:
    d = differentiate(e, name)
    sym = np.broadcast_to(np.asarray(evaluate(d, {name: points}), float), points.shape)
    fd = (np.asarray(evaluate(e, {name: points + step}), float)
          - np.asarray(evaluate(e, {name: points - step}), float)) / (2 * step)
    return float(np.max(np.abs(sym - fd) / (1.0 + np.abs(sym))))


def sample_exprs(seed: int, count: int, depth: int = 5, points: int = 10, bound: float = 1e6):
    """``count`` random trees that evaluate finitely (|value| < bound) on
    ``points`` random nodes in [0.5, 2]; returns [(expr, nodes)]."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        e = random_expr(rng, depth)
        x = rng.uniform(0.5, 2.0, points)
        try:
            vals = np.asarray(evaluate(e, {"q": x}), float)
            dv = np.asarray(evaluate(differentiate(e, "q"), {"q": x}), float)
        except DomainError:
            continue
        if np.all(np.abs(vals) < bound) and np.all(np.abs(dv) < bound):
            out.append((e, x))
    return out


# ---------------------------------------------------------------------------
# individual checks

def check_parser_derivatives() -> CheckResult:
    worst = max(derivative_defect(e, x) for e, x in sample_exprs(2024, 100))
    return CheckResult("parser_derivative_fd", worst < 1e-6, worst, 1e-6,
                       "100 random trees, depth<=5, 10 points in [0.5, 2]")


def _base_pairs():
    f = parse("q/100", {"q"})
    g = parse("w", {"w"})
    U = const(0.02)
    return [
        ("NCBS1(theta=0)~BS1", ModelSpec("NCBS1", sigma=0.2, theta=0.0, f=f),
         ModelSpec("BS1", sigma=0.2)),
        ("NCBS2(theta=0)~BS2", ModelSpec("NCBS2", sigma=0.2, r=0.05, theta=0.0, f=f),
         ModelSpec("BS2", sigma=0.2, r=0.05)),
        ("BS2(alpha=0)~BS1", ModelSpec("BS2", sigma=0.2, alpha=0.0, U=U),
         ModelSpec("BS1", sigma=0.2, U=U)),
        ("NCMG_THETA(theta=0)~MG", ModelSpec("NCMG_THETA", xi=0.5, r=0.02, theta=0.0, f=f, g=g),
         ModelSpec("MG", xi=0.5, r=0.02)),
        ("NCMG_ETA(eta=0)~MG", ModelSpec("NCMG_ETA", xi=0.5, r=0.02, eta=0.0),
         ModelSpec("MG", xi=0.5, r=0.02)),
    ]


def reduction_defect(a: ModelSpec, b: ModelSpec, seed: int = 7):
    """(max coefficient difference at 1000 random points, matrices identical?)."""
    rng = np.random.default_rng(seed)
    if a.kind.dimension == 1:
        dom = [Q_DOMAIN]
        pts = (rng.uniform(*Q_DOMAIN, 1000),)
    else:
        dom = [Q_DOMAIN, W_DOMAIN]
        pts = (rng.uniform(*Q_DOMAIN, 1000), rng.uniform(*W_DOMAIN, 1000))
    ga, gb = build_generator(a, dom), build_generator(b, dom)
    ca, cb = ga.evaluate(*pts), gb.evaluate(*pts)
    diff = max(float(np.max(np.abs(ca[k] - cb[k]))) for k in ca)
    payoff = Payoff("call", 100.0)
    if a.kind.dimension == 1:
        grid = Grid1D(*Q_DOMAIN, 200)
        oa = assemble_1d(ga, grid, default_boundaries(payoff, ga, grid)).op
        ob = assemble_1d(gb, grid, default_boundaries(payoff, gb, grid)).op
        same = all(np.array_equal(getattr(oa, k), getattr(ob, k)) for k in ("lower", "diag", "upper"))
    else:
        grid = Grid2D(Grid1D(*Q_DOMAIN, 60), Grid1D(*W_DOMAIN, 20))
        oa = assemble_2d(ga, grid, default_boundaries(payoff, ga, grid))
        ob = assemble_2d(gb, grid, default_boundaries(payoff, gb, grid))
        same = all(np.array_equal(getattr(getattr(oa, L), k), getattr(getattr(ob, L), k))
                   for L in ("Lq", "Lw") for k in ("lower", "diag", "upper"))
    return diff, same


def check_reductions() -> List[CheckResult]:
    out = []
    for name, a, b in _base_pairs():
        diff, same = reduction_defect(a, b)
        out.append(CheckResult(f"reduction {name}", diff < 1e-13 and same, diff, 1e-13,
                               "matrices bit-identical" if same else "matrices differ"))
    return out


def lb_asymmetry(spec: ModelSpec, n: int = 400) -> float:
    grid = Grid1D(*Q_DOMAIN, n)
    gen = build_generator(spec, [Q_DOMAIN])
    kinetic = replace(gen, a0=const(0.0))
    op = assemble_1d(kinetic, grid, default_boundaries(Payoff("call", 100.0), gen, grid))
    h = np.asarray(evaluate(gen.kinetic_factor, {"q": grid.nodes}), float)
    return weighted_asymmetry(op, np.broadcast_to(h, grid.nodes.shape))


def check_symmetry() -> List[CheckResult]:
    specs = [("BS1", ModelSpec("BS1", sigma=0.2)),
             ("NCBS1 f=q theta=0.1", ModelSpec("NCBS1", sigma=0.2, theta=0.1, f=parse("q", {"q"})))]
    out = []
    for name, spec in specs:
        a = lb_asymmetry(spec)
        out.append(CheckResult(f"lb_symmetry {name}", a < 1e-12, a, 1e-12, "max|WL-(WL)^T|"))
    return out


def parity_defect(spec: ModelSpec, n=400, steps=400, S0=100.0, K=100.0, T=1.0) -> float:
    call = price(spec, Instrument("call", K, S0, T), Numerics(n, steps)).price
    put = price(spec, Instrument("put", K, S0, T), Numerics(n, steps)).price
    r = spec.r if spec.r is not None else 0.5 * spec.sigma**2
    return abs(call - put - (S0 - K * math.exp(-r * T)))


def check_parity() -> List[CheckResult]:
    out = []
    for spec in (ModelSpec("BS1", sigma=0.2, chart="log"),
                 ModelSpec("BS2", sigma=0.2, r=0.05, chart="log")):
        d = parity_defect(spec)
        out.append(CheckResult(f"parity {spec.kind.value}", d < 1e-2 * 100.0, d, 1.0,
                               "|C-P-(S-K e^-rT)| at S0=K=100"))
    return out


def chart_defect(seed: int = 11) -> float:
    """BS1 generators in the two charts applied to C(q) = q^3 exp(-q/50) and
    V(x) = C(e^x); maximum relative mismatch at random nodes."""
    rng = np.random.default_rng(seed)
    q = rng.uniform(*Q_DOMAIN, 1000)
    gq = build_generator(ModelSpec("BS1", sigma=0.2), [Q_DOMAIN])
    gx = build_generator(ModelSpec("BS1", sigma=0.2, chart="log"),
                         [tuple(np.log(Q_DOMAIN))])
    c = q**3 * np.exp(-q / 50)
    c1 = (3 * q**2 - q**3 / 50) * np.exp(-q / 50)
    c2 = (6 * q - 6 * q**2 / 50 + q**3 / 2500) * np.exp(-q / 50)
    lq = gq.apply((q,), c, c1, c2)
    v1 = q * c1
    v2 = q * c1 + q**2 * c2
    lx = gx.apply((np.log(q),), c, v1, v2)
    return float(np.max(np.abs(lq - lx) / (np.abs(lq) + 1e-300)))


def check_chart() -> CheckResult:
    d = chart_defect()
    return CheckResult("chart_consistency BS1", d < 1e-10, d, 1e-10, "q-chart vs log-chart action")


CHECKS: List[Callable] = [check_parser_derivatives, check_reductions, check_symmetry,
                          check_chart, check_parity]


def run_all() -> List[CheckResult]:
    out: List[CheckResult] = []
    for fn in CHECKS:
        res = fn()
        out.extend(res if isinstance(res, list) else [res])
    return out
