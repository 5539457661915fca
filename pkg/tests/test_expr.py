import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sepdiff.expr import (
    Add, Call, Div, ExprSyntaxError, Mul, Neg, Num, Pow, Sub, UnknownFunctionError,
    Var, derivative, eval_array, evaluate, fold, local_exponent, parse_expression,
    to_source,
)


class TestParse:
    def test_exp_sqrt(self):
        e = parse_expression("exp(-2*sqrt(x))")
        assert e == Call("exp", Mul(Num(-2.0), Call("sqrt", Var())))

    def test_negative_power(self):
        assert parse_expression("x^(-1)") == Pow(Var(), -1.0)
        assert parse_expression("x^-1") == Pow(Var(), -1.0)

    def test_unbalanced_paren_offset(self):
        with pytest.raises(ExprSyntaxError) as exc:
            parse_expression("exp(")
        assert exc.value.offset == 4

    def test_unknown_function(self):
        with pytest.raises(UnknownFunctionError) as exc:
            parse_expression("sin(x)")
        assert exc.value.name == "sin"

    def test_precedence(self):
        assert parse_expression("1+2*x") == Add(Num(1.0), Mul(Num(2.0), Var()))
        # left-associative subtraction
        assert parse_expression("3-2-1") == Sub(Sub(Num(3.0), Num(2.0)), Num(1.0))

    def test_scientific_notation(self):
        assert parse_expression("1.5e-3") == Num(0.0015)

    def test_negation_binds_before_power(self):
        # grammar: factor := atom ('^' num)?, atom := '-' atom | ...
        assert parse_expression("-x^2") == Pow(Neg(Var()), 2.0)


class TestEvaluate:
    def test_spec_examples(self):
        assert evaluate(parse_expression("exp(-2*sqrt(x))"), 0.0) == 1.0
        assert evaluate(parse_expression("x^(-1)"), 2.0) == 0.5
        assert evaluate(parse_expression("log(x)"), -1.0) is None

    def test_division_by_zero_undefined(self):
        assert evaluate(parse_expression("1/x"), 0.0) is None

    def test_zero_to_negative_power_undefined(self):
        assert evaluate(parse_expression("x^(-2)"), 0.0) is None

    def test_negative_base_integer_power(self):
        assert evaluate(parse_expression("x^2"), -3.0) == 9.0

    def test_array_evaluation(self):
        e = parse_expression("x^2 + 1")
        np.testing.assert_allclose(eval_array(e, np.array([0.0, 1.0, 2.0])),
                                   [1.0, 2.0, 5.0])


def _random_expr(rng: random.Random, depth: int):
    """Random AST generator for round-trip checks (avoids Neg(Num), which the
    parser normalizes into a signed literal)."""
    if depth <= 0:
        return rng.choice([Var(), Num(round(rng.uniform(-5, 5), 3))])
    kind = rng.randrange(8)
    if kind == 0:
        return Num(round(rng.uniform(-5, 5), 3))
    if kind == 1:
        return Var()
    if kind == 2:
        return Add(_random_expr(rng, depth - 1), _random_expr(rng, depth - 1))
    if kind == 3:
        return Sub(_random_expr(rng, depth - 1), _random_expr(rng, depth - 1))
    if kind == 4:
        return Mul(_random_expr(rng, depth - 1), _random_expr(rng, depth - 1))
    if kind == 5:
        return Div(_random_expr(rng, depth - 1), _random_expr(rng, depth - 1))
    if kind == 6:
        return Pow(_random_expr(rng, depth - 1), float(rng.choice([-2, -1, 0.5, 1, 2, 3])))
    sub = _random_expr(rng, depth - 1)
    if rng.random() < 0.25 and not isinstance(sub, Num):
        return Neg(sub)
    return Call(rng.choice(["exp", "log", "sqrt", "abs"]), sub)


class TestRoundTrip:
    def test_thousand_random_asts(self):
        rng = random.Random(20240702)
        for _ in range(1000):
            e = _random_expr(rng, rng.randrange(1, 7))
            assert parse_expression(to_source(e)) == e, to_source(e)

    def test_spec_shapes(self):
        for src in ["exp(-2*sqrt(x))", "x^(-1)", "x/(1-0.3)", "2*log(x)",
                    "x^2/1", "abs(x)^(-0.5)", "1+2*x-3/x"]:
            e = parse_expression(src)
            assert parse_expression(to_source(e)) == e


class TestDerivative:
    def test_power_rule(self):
        assert to_source(derivative(parse_expression("x^2"))) == "2*x^1"

    def test_constant(self):
        assert derivative(parse_expression("7")) == Num(0.0)

    def test_chain_rule_matches_closed_form(self):
        d = derivative(parse_expression("exp(-2*sqrt(x))"))
        for x in [0.25, 1.0, 4.0]:
            expected = math.exp(-2 * math.sqrt(x)) * (-1 / math.sqrt(x))
            assert evaluate(d, x) == pytest.approx(expected, rel=1e-12)

    def _check_fd(self, e, x):
        h = 1e-5 * max(1.0, abs(x))
        f_hi, f_lo = evaluate(e, x + h), evaluate(e, x - h)
        v = evaluate(derivative(e), x)
        if None in (f_hi, f_lo, v, evaluate(e, x)):
            return
        fd = (f_hi - f_lo) / (2 * h)
        if abs(fd) > 1e-8 and abs(fd) < 1e8:
            assert v == pytest.approx(fd, rel=1e-6, abs=1e-9)

    def test_finite_difference_random(self):
        rng = random.Random(99)
        checked = 0
        for _ in range(400):
            e = _random_expr(rng, rng.randrange(1, 5))
            for x in [0.3, 1.7, 2.5]:
                self._check_fd(e, x)
                checked += 1
        assert checked > 0

    @given(st.floats(min_value=0.05, max_value=20.0))
    @settings(max_examples=200)
    def test_finite_difference_exp_sqrt(self, x):
        e = parse_expression("exp(-2*sqrt(x))")
        self._check_fd(e, x)

    def test_abs_derivative_piecewise(self):
        d = derivative(parse_expression("abs(x)"))
        assert evaluate(d, 2.0) == 1.0
        assert evaluate(d, -2.0) == -1.0
        assert evaluate(d, 0.0) is None  # kink; caller owns breakpoints


class TestFold:
    def test_constant_folding(self):
        assert fold(parse_expression("2*3+1")) == Num(7.0)

    def test_zero_mul(self):
        assert fold(Mul(Num(0.0), Call("log", Var()))) == Num(0.0)

    def test_no_division_by_zero_fold(self):
        e = Div(Num(1.0), Num(0.0))
        assert fold(e) == e


class TestLocalExponent:
    def test_pure_power_right(self):
        le = local_exponent(parse_expression("x^(-1)"), 0.0, "right")
        assert le is not None and le.exponent == pytest.approx(-1.0, abs=1e-3)

    def test_exp_sqrt_flat_at_origin(self):
        le = local_exponent(parse_expression("exp(-2*sqrt(x))"), 0.0, "right")
        assert le is not None and le.exponent == pytest.approx(0.0, abs=1e-3)

    def test_growth_at_infinity_dominant_term(self):
        le = local_exponent(parse_expression("x^2 + x^3"), math.inf)
        assert le is not None and le.exponent == pytest.approx(3.0, abs=1e-3)

    @given(st.floats(min_value=-3.0, max_value=3.0),
           st.floats(min_value=0.1, max_value=10.0),
           st.floats(min_value=-2.0, max_value=2.0))
    @settings(max_examples=200)
    def test_monomial_recovery(self, p, c, a):
        e = Mul(Num(c), Pow(Sub(Var(), Num(a)), p))
        le = local_exponent(e, a, "right")
        assert le is not None
        assert le.exponent == pytest.approx(p, abs=1e-3)
        assert not le.log_flag

    def test_undefined_samples_give_unknown(self):
        assert local_exponent(parse_expression("log(x)"), 0.0, "left") is None
