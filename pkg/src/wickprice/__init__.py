"""PDE pricing from Laplace-Beltrami generators of (deformed) quantum models.

The Black-Scholes equation and a two-factor Merton-Garman relative are
written as Wick-rotated Schroedinger equations whose kinetic operator comes
from a metric.  This package builds those generators (including
noncommutative deformations) symbolically, discretizes them with finite
differences, and checks the prices against closed-form, heat-equation and
Monte Carlo references.
"""

from .expr import parse, evaluate, differentiate, to_string
from .models import ModelKind, ModelSpec, GeneratorCoefficients, build_generator, MATCH_BS
from .pricing import Instrument, Numerics, price
from .oracles import bs_closed_form, heat_transform_price, mc_gbm_price, mc_mg_price

__version__ = "0.1.0"

__all__ = [
    "parse", "evaluate", "differentiate", "to_string",
    "ModelKind", "ModelSpec", "GeneratorCoefficients", "build_generator", "MATCH_BS",
    "Instrument", "Numerics", "price",
    "bs_closed_form", "heat_transform_price", "mc_gbm_price", "mc_mg_price",
]
