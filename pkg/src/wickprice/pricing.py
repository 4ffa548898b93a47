"""End-to-end pricing: model -> generator -> grid -> operator -> surface."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .discretize import (Grid1D, Grid2D, Payoff, assemble_1d, assemble_2d, cell_peclet,
                         default_boundaries, default_log_domain, default_price_domain,
                         default_w_domain)
from .models import GeneratorCoefficients, ModelSpec, build_generator
from .solve import PriceSurface, convergence_study, evolve_1d, evolve_2d, interpolate

__all__ = ["Instrument", "Numerics", "PriceResult", "make_grid", "price", "price_ladder"]


@dataclass(frozen=True)
class Instrument:
    payoff: str = "call"
    K: float = 100.0
    S0: float = 100.0
    T: float = 1.0
    w0: Optional[float] = None


@dataclass(frozen=True)
class Numerics:
    n: int = 400
    steps: int = 400
    scheme: str = "crank-nicolson"
    n_w: int = 50
    # None -> defaults; otherwise (lo, hi) in chart coordinates
    domain: Optional[Tuple[float, float]] = None
    w_domain: Optional[Tuple[float, float]] = None
    rannacher_steps: int = 2


@dataclass
class PriceResult:
    price: float
    surface: PriceSurface
    generator: GeneratorCoefficients
    grid: object
    peclet: float = 0.0
    meta: dict = field(default_factory=dict)


def make_grid(spec: ModelSpec, inst: Instrument, num: Numerics):
    if spec.kind.dimension == 1:
        if num.domain is not None:
            lo, hi = num.domain
        elif spec.chart == "log":
            lo, hi = default_log_domain(inst.S0, spec.sigma, inst.T)
        else:
            lo, hi = default_price_domain(inst.K)
        return Grid1D(lo, hi, num.n, spec.chart)
    if inst.w0 is None:
        raise ValueError("two-factor models need w0")
    qd = num.domain if num.domain is not None else default_price_domain(inst.K)
    wd = num.w_domain if num.w_domain is not None else default_w_domain(inst.w0)
    return Grid2D(Grid1D(*qd, num.n, "price"), Grid1D(*wd, num.n_w, "price"))


def price(spec: ModelSpec, inst: Instrument, num: Numerics = Numerics(),
          checkpoints: Sequence[float] = ()) -> PriceResult:
    grid = make_grid(spec, inst, num)
    payoff = Payoff(inst.payoff, inst.K)
    if isinstance(grid, Grid1D):
        gen = build_generator(spec, [(grid.lo, grid.hi)])
        bc = default_boundaries(payoff, gen, grid)
        op = assemble_1d(gen, grid, bc)
        surf = evolve_1d(op, payoff(grid.prices), inst.T, num.steps, num.scheme,
                         rannacher_steps=num.rannacher_steps, checkpoints=checkpoints)
        value = interpolate(surf, inst.S0)
    else:
        gen = build_generator(spec, [(grid.q.lo, grid.q.hi), (grid.w.lo, grid.w.hi)])
        bc = default_boundaries(payoff, gen, grid)
        op = assemble_2d(gen, grid, bc)
        q, _ = grid.mesh()
        surf = evolve_2d(op, payoff(q), inst.T, num.steps,
                         rannacher_steps=num.rannacher_steps, checkpoints=checkpoints)
        value = interpolate(surf, (inst.S0, inst.w0))
    surf.meta["model"] = spec.kind.value
    return PriceResult(value, surf, gen, grid, cell_peclet(gen, grid))


def price_ladder(spec: ModelSpec, inst: Instrument, num: Numerics,
                 n_ladder: Sequence[int], steps_ladder: Sequence[int],
                 reference: Optional[float] = None):
    """Convergence table for ``spec`` along the given ladders."""
    from dataclasses import replace

    def fn(n, k):
        return price(spec, inst, replace(num, n=n, steps=k)).price

    return convergence_study(fn, n_ladder, steps_ladder, reference)
