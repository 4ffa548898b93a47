import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wickprice.checks import derivative_defect, random_expr, sample_exprs
from wickprice.expr import (DomainError, ParseError, UnknownIdentifierError, const,
                            differentiate, evaluate, make_add, make_mul, parse, to_string,
                            var, variables_of)


class TestParse:
    def test_power_binds_tighter_than_product(self):
        assert evaluate(parse("2*q^2", {"q"}), {"q": 3.0}) == 18.0

    def test_power_is_right_associative(self):
        assert evaluate(parse("2^3^2", set()), {}) == 2.0**9

    def test_unary_minus_below_power(self):
        assert evaluate(parse("-q^2", {"q"}), {"q": 3.0}) == -9.0

    def test_functions(self):
        e = parse("exp(ln(q)) + sqrt(q)", {"q"})
        assert evaluate(e, {"q": 4.0}) == pytest.approx(6.0)

    def test_trailing_operator_reports_offset(self):
        with pytest.raises(ParseError) as info:
            parse("q + ", {"q"})
        assert info.value.offset == 4

    def test_double_operator_reports_offset(self):
        with pytest.raises(ParseError) as info:
            parse("q+*2", {"q"})
        assert info.value.offset == 2

    def test_unknown_identifier(self):
        with pytest.raises(UnknownIdentifierError):
            parse("theta*q", {"q"})

    def test_exponent_must_be_integer_constant(self):
        with pytest.raises(ParseError):
            parse("q^q", {"q"})
        with pytest.raises(ParseError):
            parse("q^1.5", {"q"})

    def test_variables_of(self):
        assert variables_of(parse("q*w + 1", {"q", "w"})) == {"q", "w"}


class TestEvaluate:
    def test_array_bindings(self):
        q = np.array([1.0, 2.0, 3.0])
        np.testing.assert_allclose(evaluate(parse("q^2 + 1", {"q"}), {"q": q}), q**2 + 1)

    @pytest.mark.parametrize("text,q", [("ln(q)", 0.0), ("ln(q)", -1.0), ("sqrt(q)", -1.0),
                                        ("1/q", 0.0)])
    def test_domain_errors(self, text, q):
        with pytest.raises(DomainError):
            evaluate(parse(text, {"q"}), {"q": q})

    def test_overflow_is_domain_error(self):
        with pytest.raises(DomainError):
            evaluate(parse("q^400", {"q"}), {"q": 1e10})

    def test_constant_folding(self):
        e = parse("2*3 + 0*q + q*1", {"q"})
        assert to_string(e) == "6.0 + q"
        assert to_string(make_mul(const(1.0), make_add(var("q"), const(0.0)))) == "q"


class TestDifferentiate:
    def test_polynomial(self):
        d = differentiate(parse("q^3 + 2*q", {"q"}), "q")
        assert evaluate(d, {"q": 2.0}) == 14.0

    def test_constant_collapses(self):
        assert differentiate(parse("3*w", {"q", "w"}), "q").is_const

    def test_chain_rule(self):
        d = differentiate(parse("sqrt(q^2 + 1)", {"q"}), "q")
        assert evaluate(d, {"q": 3.0}) == pytest.approx(3.0 / math.sqrt(10.0), rel=1e-14)

    def test_quotient(self):
        d = differentiate(parse("1/q", {"q"}), "q")
        assert evaluate(d, {"q": 2.0}) == pytest.approx(-0.25)

    def test_hundred_random_trees_match_central_difference(self):
        worst = max(derivative_defect(e, x) for e, x in sample_exprs(2024, 100))
        assert worst < 1e-6


@st.composite
def trees(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    depth = draw(st.integers(1, 5))
    return random_expr(np.random.default_rng(seed), depth)


class TestProperties:
    @settings(max_examples=200, deadline=None)
    @given(trees())
    def test_print_parse_round_trip(self, e):
        again = parse(to_string(e), {"q"})
        assert again == e

    @settings(max_examples=100, deadline=None)
    @given(trees(), trees(), st.floats(-3, 3), st.floats(-3, 3))
    def test_derivative_is_linear(self, a, b, s, t):
        x = np.linspace(0.5, 2.0, 7)
        lhs_e = make_add(make_mul(const(s), a), make_mul(const(t), b))
        try:
            lhs = np.asarray(evaluate(differentiate(lhs_e, "q"), {"q": x}), float)
            da = np.asarray(evaluate(differentiate(a, "q"), {"q": x}), float)
            db = np.asarray(evaluate(differentiate(b, "q"), {"q": x}), float)
        except DomainError:
            return
        rhs = s * da + t * db
        np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-9 * (1 + np.max(np.abs(rhs))))
