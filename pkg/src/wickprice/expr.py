"""Small expression language for deformation functions and potentials.

Expressions are immutable trees built from constants, declared variables,
the binary operators ``+ - * / ^`` (integer, non-negative exponents only),
unary minus and the functions ``exp``, ``ln`` and ``sqrt``.  Trees are
evaluated on floats or numpy arrays and differentiated symbolically.

Construction goes through the ``make_*`` helpers, which fold constant
subtrees and drop neutral elements (``x*1``, ``x+0``, ``0*x``).  This is
what makes derivatives of constants collapse to ``0`` and lets a deformed
model with a zero deformation parameter reduce to exactly the same tree as
its undeformed counterpart.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

import numpy as np

__all__ = [
    "Expr",
    "ExprError",
    "ParseError",
    "UnknownIdentifierError",
    "DomainError",
    "const",
    "var",
    "make_add",
    "make_sub",
    "make_mul",
    "make_div",
    "make_pow",
    "make_neg",
    "make_func",
    "parse",
    "evaluate",
    "differentiate",
    "to_string",
    "variables_of",
]

FUNCTIONS = ("exp", "ln", "sqrt")
BINARY = ("add", "sub", "mul", "div")


class ExprError(ValueError):
    """Base class for expression errors."""


class ParseError(ExprError):
    """Syntax error; ``offset`` is the 0-based character position."""

    def __init__(self, message: str, offset: int, text: str = ""):
        self.offset = offset
        self.text = text
        super().__init__(f"{message} at offset {offset}")


class UnknownIdentifierError(ParseError):
    def __init__(self, name: str, offset: int, text: str = ""):
        self.name = name
        super().__init__(f"unknown identifier {name!r}", offset, text)


class DomainError(ExprError, ArithmeticError):
    """Evaluation left the real domain (log/sqrt of negatives, x/0, overflow)."""


@dataclass(frozen=True)
class Expr:
    """Immutable expression node.

    ``kind`` is one of ``const``, ``var``, ``add``, ``sub``, ``mul``,
    ``div``, ``pow``, ``neg``, ``exp``, ``ln``, ``sqrt``.  ``value`` holds
    the float for constants, the name for variables and the integer
    exponent for ``pow``.
    """

    kind: str
    args: tuple = ()
    value: Union[float, str, int, None] = None

    def __str__(self) -> str:
        return to_string(self)

    # operator sugar, mostly for building models in code
    def __add__(self, other):
        return make_add(self, _lift(other))

    def __radd__(self, other):
        return make_add(_lift(other), self)

    def __sub__(self, other):
        return make_sub(self, _lift(other))

    def __rsub__(self, other):
        return make_sub(_lift(other), self)

    def __mul__(self, other):
        return make_mul(self, _lift(other))

    def __rmul__(self, other):
        return make_mul(_lift(other), self)

    def __truediv__(self, other):
        return make_div(self, _lift(other))

    def __rtruediv__(self, other):
        return make_div(_lift(other), self)

    def __pow__(self, n):
        return make_pow(self, n)

    def __neg__(self):
        return make_neg(self)

    @property
    def is_const(self) -> bool:
        return self.kind == "const"


def _lift(x) -> Expr:
    if isinstance(x, Expr):
        return x
    return const(x)


def const(x: float) -> Expr:
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"non-finite constant {x!r}")
    return Expr("const", (), x)


def var(name: str) -> Expr:
    return Expr("var", (), name)


def _is(e: Expr, v: float) -> bool:
    return e.kind == "const" and e.value == v


def make_add(a: Expr, b: Expr) -> Expr:
    if a.is_const and b.is_const:
        return const(a.value + b.value)
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    return Expr("add", (a, b))


def make_sub(a: Expr, b: Expr) -> Expr:
    if a.is_const and b.is_const:
        return const(a.value - b.value)
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return make_neg(b)
    return Expr("sub", (a, b))


def make_mul(a: Expr, b: Expr) -> Expr:
    if a.is_const and b.is_const:
        return const(a.value * b.value)
    if _is(a, 0.0) or _is(b, 0.0):
        return const(0.0)
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    return Expr("mul", (a, b))


def make_div(a: Expr, b: Expr) -> Expr:
    if _is(b, 0.0):
        raise DomainError("division by constant zero")
    if a.is_const and b.is_const:
        return const(a.value / b.value)
    if _is(a, 0.0):
        return const(0.0)
    if _is(b, 1.0):
        return a
    return Expr("div", (a, b))


def make_pow(base: Expr, n) -> Expr:
    if isinstance(n, Expr):
        if not n.is_const:
            raise ExprError("exponent must be a constant")
        n = n.value
    if float(n) != int(n) or int(n) < 0:
        raise ExprError(f"exponent must be a non-negative integer, got {n!r}")
    n = int(n)
    if n == 0:
        return const(1.0)
    if n == 1:
        return base
    if base.is_const:
        try:
            return const(base.value ** n)
        except OverflowError as exc:
            raise DomainError(f"overflow folding {base.value}^{n}") from exc
    return Expr("pow", (base,), n)


def make_neg(a: Expr) -> Expr:
    if a.is_const:
        return const(-a.value)
    if a.kind == "neg":
        return a.args[0]
    return Expr("neg", (a,))


def make_func(name: str, a: Expr) -> Expr:
    if name not in FUNCTIONS:
        raise ExprError(f"unknown function {name!r}")
    if a.is_const:
        return const(_apply_func(name, a.value))
    return Expr(name, (a,))


# ---------------------------------------------------------------------------
# evaluation

def _apply_func(name: str, x):
    scalar = np.ndim(x) == 0
    with np.errstate(all="ignore"):
        if name == "exp":
            out = np.exp(x)
            if not np.all(np.isfinite(out)):
                raise DomainError("exp overflow")
        elif name == "ln":
            if np.any(np.asarray(x) <= 0.0):
                raise DomainError("ln of non-positive argument")
            out = np.log(x)
        elif name == "sqrt":
            if np.any(np.asarray(x) < 0.0):
                raise DomainError("sqrt of negative argument")
            out = np.sqrt(x)
        else:  # pragma: no cover - guarded by make_func
            raise ExprError(name)
    return float(out) if scalar else out


def evaluate(e: Expr, bindings: Mapping[str, Union[float, np.ndarray]]):
    """Evaluate ``e``; variables may be bound to floats or broadcastable arrays.

    Raises DomainError instead of returning NaN or infinity.
    """
    k = e.kind
    if k == "const":
        return e.value
    if k == "var":
        try:
            return bindings[e.value]
        except KeyError:
            raise ExprError(f"no binding for variable {e.value!r}") from None
    if k == "neg":
        return -evaluate(e.args[0], bindings)
    if k == "pow":
        x = evaluate(e.args[0], bindings)
        try:
            with np.errstate(over="ignore"):
                out = x ** e.value
        except OverflowError:
            raise DomainError("overflow in power") from None
        if not np.all(np.isfinite(out)):
            raise DomainError("overflow in power")
        return out
    if k in FUNCTIONS:
        return _apply_func(k, evaluate(e.args[0], bindings))
    a = evaluate(e.args[0], bindings)
    b = evaluate(e.args[1], bindings)
    if k == "add":
        return a + b
    if k == "sub":
        return a - b
    if k == "mul":
        with np.errstate(over="ignore"):
            out = a * b
        if not np.all(np.isfinite(out)):
            raise DomainError("overflow in product")
        return out
    if k == "div":
        if np.any(np.asarray(b) == 0.0):
            raise DomainError("division by zero")
        with np.errstate(over="ignore"):
            out = a / b
        if not np.all(np.isfinite(out)):
            raise DomainError("overflow in quotient")
        return out
    raise ExprError(f"bad node kind {k!r}")


# ---------------------------------------------------------------------------
# symbolic differentiation

def differentiate(e: Expr, name: str) -> Expr:
    """Exact derivative of ``e`` with respect to variable ``name``."""
    k = e.kind
    if k == "const":
        return const(0.0)
    if k == "var":
        return const(1.0 if e.value == name else 0.0)
    if k == "neg":
        return make_neg(differentiate(e.args[0], name))
    if k in ("add", "sub"):
        da = differentiate(e.args[0], name)
        db = differentiate(e.args[1], name)
        return make_add(da, db) if k == "add" else make_sub(da, db)
    if k == "mul":
        a, b = e.args
        return make_add(make_mul(differentiate(a, name), b),
                        make_mul(a, differentiate(b, name)))
    if k == "div":
        a, b = e.args
        num = make_sub(make_mul(differentiate(a, name), b),
                       make_mul(a, differentiate(b, name)))
        return make_div(num, make_pow(b, 2))
    if k == "pow":
        (u,), n = e.args, e.value
        return make_mul(make_mul(const(n), make_pow(u, n - 1)), differentiate(u, name))
    u = e.args[0]
    du = differentiate(u, name)
    if k == "exp":
        return make_mul(e, du)
    if k == "ln":
        return make_div(du, u)
    if k == "sqrt":
        return make_div(du, make_mul(const(2.0), e))
    raise ExprError(f"bad node kind {k!r}")


def variables_of(e: Expr) -> frozenset:
    if e.kind == "var":
        return frozenset([e.value])
    out = frozenset()
    for a in e.args:
        out |= variables_of(a)
    return out


# ---------------------------------------------------------------------------
# printing

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}
_SYM = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


def _prec(e: Expr) -> int:
    if e.kind == "const" and e.value < 0:
        return 3
    return _PREC.get(e.kind, 5)


def to_string(e: Expr) -> str:
    """Render ``e`` so that ``parse(to_string(e))`` evaluates identically."""
    k = e.kind
    if k == "const":
        s = repr(e.value)
        return s if e.value >= 0 else f"-{repr(-e.value)}"
    if k == "var":
        return e.value
    if k in FUNCTIONS:
        return f"{k}({to_string(e.args[0])})"
    if k == "neg":
        inner = e.args[0]
        s = to_string(inner)
        return f"-{s}" if _prec(inner) > 3 else f"-({s})"
    if k == "pow":
        base = e.args[0]
        s = to_string(base)
        if _prec(base) <= 4:
            s = f"({s})"
        return f"{s}^{e.value}"
    a, b = e.args
    p = _PREC[k]
    sa, sb = to_string(a), to_string(b)
    if _prec(a) < p:
        sa = f"({sa})"
    # equal precedence on the right keeps the tree shape (and rounding) intact
    if _prec(b) <= p or _prec(b) == 3:
        sb = f"({sb})"
    return f"{sa} {_SYM[k]} {sb}" if p == 1 else f"{sa}{_SYM[k]}{sb}"


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
    r")"
)


def _tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    # add/sub < mul/div < unary minus < pow (right assoc)
    def __init__(self, text: str, variables: frozenset):
        self.text = text
        self.variables = variables
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, sym: str):
        kind, val, off = self.take()
        if kind != "op" or val != sym:
            what = "end of input" if kind == "end" else repr(val)
            raise ParseError(f"expected {sym!r}, found {what}", off, self.text)

    def error(self, message):
        kind, val, off = self.peek()
        raise ParseError(message, off, self.text)

    def parse(self) -> Expr:
        e = self.additive()
        kind, val, off = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {val!r}", off, self.text)
        return e

    def additive(self) -> Expr:
        e = self.multiplicative()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                rhs = self.multiplicative()
                e = make_add(e, rhs) if val == "+" else make_sub(e, rhs)
            else:
                return e

    def multiplicative(self) -> Expr:
        e = self.unary()
        while True:
            kind, val, off = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                rhs = self.unary()
                if val == "*":
                    e = make_mul(e, rhs)
                else:
                    if _is(rhs, 0.0):
                        raise ParseError("division by constant zero", off, self.text)
                    e = make_div(e, rhs)
            else:
                return e

    def unary(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return make_neg(self.unary())
        if kind == "op" and val == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, val, off = self.peek()
        if kind == "op" and val == "^":
            self.take()
            exp_off = self.peek()[2]
            exponent = self.unary()
            if not exponent.is_const:
                raise ParseError("exponent must be a constant", exp_off, self.text)
            n = exponent.value
            if n < 0 or n != int(n):
                raise ParseError(
                    f"exponent must be a non-negative integer, got {n!r}", exp_off, self.text)
            return make_pow(base, int(n))
        return base

    def atom(self) -> Expr:
        kind, val, off = self.take()
        if kind == "num":
            return const(float(val))
        if kind == "name":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.additive()
                self.expect(")")
                try:
                    return make_func(val, arg)
                except DomainError as exc:
                    raise ParseError(str(exc), off, self.text) from None
            if val not in self.variables:
                raise UnknownIdentifierError(val, off, self.text)
            return var(val)
        if kind == "op" and val == "(":
            e = self.additive()
            self.expect(")")
            return e
        what = "end of input" if kind == "end" else repr(val)
        raise ParseError(f"unexpected {what}", off, self.text)


def parse(text: str, variables: Iterable[str]) -> Expr:
    """Parse ``text`` into an expression over the declared ``variables``.

    >>> evaluate(parse("2*q^2", {"q"}), {"q": 3.0})
    18.0
    """
    if not text or not text.strip():
        raise ParseError("empty expression", 0, text or "")
    variables = frozenset(variables)
    clash = variables & set(FUNCTIONS)
    if clash:
        raise ExprError(f"variable names shadow functions: {sorted(clash)}")
    return _Parser(text, variables).parse()
