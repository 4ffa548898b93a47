"""Command-line driver: ``python -m wickprice {price,compare,converge,check}``.

Exit codes: 0 ok, 1 a compare/check gate failed, 2 configuration error,
3 numerical failure, 4 model-constraint violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from .discretize import AssemblyError
from .expr import ExprError, ParseError, parse
from .geometry import PositivityError
from .models import MATCH_BS, ConstraintError, EllipticityError, ModelKind, ModelSpec, wick_sign_convention
from .oracles import bs_closed_form, heat_transform_price, mc_gbm_price, mc_mg_price
from .pricing import Instrument, Numerics, price, price_ladder
from .solve import NumericalError, SingularSystemError

log = logging.getLogger("wickprice")

EXIT_OK, EXIT_GATE, EXIT_CONFIG, EXIT_NUMERICS, EXIT_CONSTRAINT = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    """Bad or missing configuration; the message names the offending key."""


@dataclass
class RunConfig:
    spec: ModelSpec
    instrument: Instrument
    numerics: Numerics
    oracles: Dict[str, Any] = field(default_factory=dict)
    converge: Dict[str, Any] = field(default_factory=dict)
    out_dir: Optional[str] = None


_MODEL_KEYS = {"kind", "sigma", "r", "alpha", "theta", "f", "g", "xi", "eta", "rho", "U", "chart"}
_INSTRUMENT_KEYS = {"payoff", "K", "S0", "T", "w0"}
_NUMERICS_KEYS = {"n", "n_w", "steps", "scheme", "domain", "w_domain", "rannacher_steps"}
_ORACLE_KEYS = {"closed_form", "heat", "mc", "mc_paths", "mc_steps", "seed", "tolerance",
                "heat_tolerance", "mc_rel_tolerance"}


def _strip(block: Dict, where: str, allowed) -> Dict:
    if not isinstance(block, dict):
        raise ConfigError(f"{where}: expected an object")
    out = {k: v for k, v in block.items() if not k.startswith("_")}
    unknown = set(out) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    return out


def _expr(text, key, variables):
    if not isinstance(text, str):
        raise ConfigError(f"{key}: expected an expression string")
    try:
        return parse(text, variables)
    except ParseError as exc:
        raise ConfigError(f"{key}: {exc}") from exc


def _num(block, key, where, default=None, kind=float):
    v = block.get(key, default)
    if v is None:
        return None
    try:
        return kind(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.{key}: expected a number, got {v!r}") from None


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return config_from_dict(raw)


def config_from_dict(raw: Dict) -> RunConfig:
    raw = _strip(raw, "config", {"model", "instrument", "numerics", "oracles", "output", "converge"})
    if "model" not in raw:
        raise ConfigError("config: missing 'model' block")
    m = _strip(raw["model"], "model", _MODEL_KEYS)
    try:
        kind = ModelKind(m.get("kind"))
    except ValueError:
        raise ConfigError(f"model.kind: must be one of {[k.value for k in ModelKind]}, "
                          f"got {m.get('kind')!r}") from None
    chart = m.get("chart", "log" if kind in (ModelKind.BS1, ModelKind.BS2) else "price")
    if kind.dimension == 2:
        variables = ("q", "w")
    else:
        variables = ("x",) if chart == "log" else ("q",)
    U = m.get("U", MATCH_BS)
    if U != MATCH_BS:
        U = _expr(str(U) if isinstance(U, (int, float)) else U, "model.U", variables)
    kw = dict(kind=kind, chart=chart, U=U)
    for key in ("sigma", "r", "xi"):
        if key in m:
            kw[key] = _num(m, key, "model")
    for key in ("alpha", "theta", "eta", "rho"):
        if key in m:
            kw[key] = _num(m, key, "model")
    if "f" in m:
        kw["f"] = _expr(m["f"], "model.f", ("q",))
    if "g" in m:
        kw["g"] = _expr(m["g"], "model.g", ("w",))
    try:
        spec = ModelSpec(**kw)
    except ConstraintError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"model: {exc}") from exc

    i = _strip(raw.get("instrument", {}), "instrument", _INSTRUMENT_KEYS)
    inst = Instrument(payoff=i.get("payoff", "call"), K=_num(i, "K", "instrument", 100.0),
                      S0=_num(i, "S0", "instrument", 100.0), T=_num(i, "T", "instrument", 1.0),
                      w0=_num(i, "w0", "instrument"))
    if inst.payoff not in ("call", "put"):
        raise ConfigError(f"instrument.payoff: must be 'call' or 'put', got {inst.payoff!r}")
    for key in ("K", "S0", "T"):
        if not getattr(inst, key) > 0:
            raise ConfigError(f"instrument.{key}: must be > 0")
    if kind.dimension == 2 and not (inst.w0 or 0) > 0:
        raise ConfigError("instrument.w0: required (> 0) for two-factor models")

    nb = _strip(raw.get("numerics", {}), "numerics", _NUMERICS_KEYS)

    def bounds(key):
        v = nb.get(key, "auto")
        if v == "auto" or v is None:
            return None
        if not (isinstance(v, (list, tuple)) and len(v) == 2):
            raise ConfigError(f"numerics.{key}: expected 'auto' or [lo, hi]")
        return (float(v[0]), float(v[1]))

    num = Numerics(n=_num(nb, "n", "numerics", 400, int), steps=_num(nb, "steps", "numerics", 400, int),
                   scheme=nb.get("scheme", "crank-nicolson"), n_w=_num(nb, "n_w", "numerics", 50, int),
                   domain=bounds("domain"), w_domain=bounds("w_domain"),
                   rannacher_steps=_num(nb, "rannacher_steps", "numerics", 2, int))
    if num.scheme not in ("crank-nicolson", "implicit-euler"):
        raise ConfigError(f"numerics.scheme: unknown scheme {num.scheme!r}")
    if num.n < 3 or num.steps < 1 or num.n_w < 3:
        raise ConfigError("numerics: need n >= 3, n_w >= 3 and steps >= 1")

    oracles = _strip(raw.get("oracles", {}), "oracles", _ORACLE_KEYS)
    conv = raw.get("converge", {})
    if not isinstance(conv, dict):
        raise ConfigError("converge: expected an object")
    out = raw.get("output", {})
    out_dir = out.get("dir") if isinstance(out, dict) else None
    return RunConfig(spec, inst, num, oracles, conv, out_dir)


# ---------------------------------------------------------------------------
# output helpers

def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path: str, header: List[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def _out_dir(args, cfg: Optional[RunConfig]) -> str:
    d = args.out or (cfg.out_dir if cfg else None) or "."
    os.makedirs(d, exist_ok=True)
    return d


def _report(path: str, lines: List[str]) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg)


# ---------------------------------------------------------------------------
# commands

def _price(cfg: RunConfig):
    res = price(cfg.spec, cfg.instrument, cfg.numerics)
    if res.peclet > 1.0:
        log.warning("cell Peclet number %.3g > 1: central first differences may oscillate; "
                    "refine the grid", res.peclet)
    return res


def _spec_lines(cfg: RunConfig) -> List[str]:
    s, i, n = cfg.spec, cfg.instrument, cfg.numerics
    return [
        f"model: {s.kind.value} chart={s.chart} sigma={s.sigma} r={s.r} alpha={s.alpha} "
        f"theta={s.theta} xi={s.xi} eta={s.eta} U={s.U if isinstance(s.U, str) else str(s.U)}",
        f"instrument: {i.payoff} K={i.K} S0={i.S0} T={i.T} w0={i.w0}",
        f"numerics: n={n.n} n_w={n.n_w} steps={n.steps} scheme={n.scheme} "
        f"rannacher_steps={n.rannacher_steps}",
        f"convention: {wick_sign_convention()}",
    ]


def cmd_price(args, cfg: RunConfig) -> int:
    res = _price(cfg)
    out = _out_dir(args, cfg)
    grid = res.grid
    if res.generator.dimension == 1:
        rows = zip(grid.prices.tolist(), res.surface.final.tolist())
        write_csv(os.path.join(out, "price_slice.csv"), ["q", "value"], rows)
    else:
        q, w = grid.mesh()
        rows = zip(q.ravel().tolist(), w.ravel().tolist(), res.surface.final.ravel().tolist())
        write_csv(os.path.join(out, "price_slice.csv"), ["q", "w", "value"], rows)
    lines = _spec_lines(cfg) + [f"boundaries: {res.surface.meta['bc']}",
                                f"max cell Peclet: {res.peclet!r}",
                                f"price: {res.price!r}"]
    _report(os.path.join(out, "report.txt"), lines)
    _say(args, f"price {res.price:.10g}")
    return EXIT_OK


def _closed_form_rate(cfg: RunConfig) -> Optional[float]:
    """Rate under which the model is plain Black-Scholes, if it is."""
    s = cfg.spec
    if not isinstance(s.U, str):
        return None
    if s.kind is ModelKind.BS1 or (s.kind is ModelKind.NCBS1 and s.theta == 0):
        return 0.5 * s.sigma**2
    if s.kind is ModelKind.BS2 or (s.kind is ModelKind.NCBS2 and s.theta == 0):
        return s.r
    return None


def cmd_compare(args, cfg: RunConfig) -> int:
    o = cfg.oracles
    res = _price(cfg)
    pde = res.price
    s, i, num = cfg.spec, cfg.instrument, cfg.numerics
    seed = args.seed if args.seed is not None else int(o.get("seed", 0))
    tol = float(o.get("tolerance", 5e-3 if s.kind.dimension == 1 else 1e-2))
    rows, ok = [], True
    rate = _closed_form_rate(cfg)
    ref = None
    if rate is not None and o.get("closed_form", True):
        ref = bs_closed_form(i.S0, i.K, rate, s.sigma, i.T, i.payoff)
    rows.append(("pde", pde, ref, None, None, None))
    if ref is not None:
        err = abs(pde - ref)
        ok &= err <= tol * abs(ref)
        rows[0] = ("pde", pde, ref, err, err / abs(ref), None)
        rows.append(("closed_form", ref, pde, err, err / abs(pde), None))
    if rate is not None and o.get("heat", False):
        h = heat_transform_price(i.S0, i.K, rate, s.sigma, i.T, num.n, num.steps, i.payoff)
        err = abs(h - pde)
        ok &= err <= float(o.get("heat_tolerance", 1e-2)) * abs(pde)
        rows.append(("heat_transform", h, pde, err, err / abs(pde), None))
    if o.get("mc", False):
        paths = int(o.get("mc_paths", 200_000))
        rel = float(o.get("mc_rel_tolerance", 0.02))
        est = None
        if rate is not None:
            est = mc_gbm_price(i.S0, i.K, rate, s.sigma, i.T, paths, seed, i.payoff)
        elif s.kind is ModelKind.MG and isinstance(s.U, str):
            est = mc_mg_price(i.S0, i.w0, i.K, s.r, s.xi, i.T, paths,
                              int(o.get("mc_steps", 200)), seed, i.payoff,
                              w_floor=res.grid.w.lo)
        else:
            log.warning("no Monte Carlo oracle for %s with this potential", s.kind.value)
        if est is not None:
            err = abs(est.price - pde)
            ok &= err <= max(3 * est.stderr, rel * abs(pde))
            rows.append(("monte_carlo", est.price, pde, err, err / abs(pde), est.stderr))
    out = _out_dir(args, cfg)
    write_csv(os.path.join(out, "compare.csv"),
              ["method", "price", "reference", "abs_err", "rel_err", "stderr"], rows)
    lines = _spec_lines(cfg) + [f"seed: {seed}"] + [
        f"{r[0]}: price={_fmt(r[1])} reference={_fmt(r[2])} abs_err={_fmt(r[3])}" for r in rows
    ] + [f"gates: {'PASS' if ok else 'FAIL'}"]
    _report(os.path.join(out, "report.txt"), lines)
    for r in rows:
        _say(args, f"{r[0]:>15s} {r[1]:.10g}" + (f"  err {r[3]:.3g}" if r[3] is not None else ""))
    _say(args, "all gates pass" if ok else "tolerance gate FAILED")
    return EXIT_OK if ok else EXIT_GATE


def cmd_converge(args, cfg: RunConfig) -> int:
    c = cfg.converge
    s, i = cfg.spec, cfg.instrument
    n_ladder = [int(v) for v in c.get("n", [cfg.numerics.n])]
    k_ladder = [int(v) for v in c.get("steps", [cfg.numerics.steps])]
    rate = _closed_form_rate(cfg)
    ref = None
    if c.get("reference", "closed_form") == "closed_form" and rate is not None:
        ref = bs_closed_form(i.S0, i.K, rate, s.sigma, i.T, i.payoff)
    try:
        rows = price_ladder(s, i, cfg.numerics, n_ladder, k_ladder, ref)
    except ValueError as exc:
        raise ConfigError(f"converge: {exc}") from exc
    out = _out_dir(args, cfg)
    write_csv(os.path.join(out, "converge.csv"),
              ["n", "steps", "price", "error", "ratio", "order"],
              [(r.n, r.steps, r.price, r.error, r.ratio, r.order) for r in rows])
    for r in rows:
        _say(args, f"n={r.n:6d} steps={r.steps:6d} price={r.price:.10g} "
                   f"err={r.error:.3e} order={_fmt(r.order)}")
    return EXIT_OK


def cmd_check(args, cfg=None) -> int:
    from .checks import run_all

    results = run_all()
    width = max(len(r.name) for r in results)
    for r in results:
        _say(args, f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  "
                   f"{r.value:.3e} (tol {r.tolerance:.0e})")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_csv(os.path.join(args.out, "check.csv"), ["check", "passed", "value", "tolerance"],
                  [(r.name, int(r.passed), r.value, r.tolerance) for r in results])
    return EXIT_OK if all(r.passed for r in results) else EXIT_GATE


COMMANDS = {"price": cmd_price, "compare": cmd_compare, "converge": cmd_converge, "check": cmd_check}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wickprice", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON run configuration (not needed for check)")
    p.add_argument("--out", help="output directory for CSV and report files")
    p.add_argument("--seed", type=int, help="override the Monte Carlo seed")
    p.add_argument("--quiet", action="store_true", help="suppress stdout")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = None
        if args.command != "check":
            if not args.config:
                raise ConfigError("--config is required for this command")
            cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConstraintError, PositivityError, EllipticityError) as exc:
        print(f"model constraint violated: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except (NumericalError, SingularSystemError, AssemblyError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    except (ExprError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
