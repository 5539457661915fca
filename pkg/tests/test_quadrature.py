import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sepdiff.expr import eval_array, parse_expression
from sepdiff.quadrature import (
    InconclusiveTail, IntegralVerdict, adaptive_quad, improper_integral,
)


def F(src):
    e = parse_expression(src)
    return lambda xs: eval_array(e, xs)


class TestAdaptive:
    def test_polynomial(self):
        assert adaptive_quad(F("x^2"), 0, 1) == pytest.approx(1 / 3, rel=1e-12)

    def test_orientation(self):
        assert adaptive_quad(F("x"), 1, 0) == pytest.approx(-0.5, rel=1e-12)

    def test_stiff_exponential(self):
        assert adaptive_quad(F("exp(-50*x)"), 0, 10) == pytest.approx(1 / 50, rel=1e-9)

    @given(st.floats(min_value=-3, max_value=3), st.floats(min_value=0.1, max_value=4))
    @settings(max_examples=100, deadline=None)
    def test_linear_exact(self, a, w):
        b = a + w
        assert adaptive_quad(F("2*x+1"), a, b) == pytest.approx(b * b + b - a * a - a,
                                                                rel=1e-9, abs=1e-12)


class TestImproper:
    def test_integrable_singularity(self):
        v = improper_integral(F("x^(-0.5)"), 0, 1)
        assert v.finite and v.value == pytest.approx(2.0, rel=1e-6)

    def test_divergent_hyperbola(self):
        v = improper_integral(F("x^(-1)"), 0, 1)
        assert not v.finite and v.value == math.inf

    def test_borderline_099(self):
        # closed form 1/(1-0.99) = 100; stresses the borderline threshold
        v = improper_integral(F("x^(-0.99)"), 0, 1)
        assert v.finite and v.value == pytest.approx(100.0, rel=1e-6)

    def test_borderline_101_divergent(self):
        v = improper_integral(F("x^(-1.01)"), 0, 1)
        assert not v.finite

    def test_infinite_domain_convergent(self):
        v = improper_integral(F("x^(-2)"), 1, math.inf)
        assert v.finite and v.value == pytest.approx(1.0, rel=1e-9)

    def test_infinite_domain_divergent(self):
        assert not improper_integral(F("x^(-1)"), 1, math.inf).finite
        assert not improper_integral(F("1"), 0, math.inf).finite

    def test_exponential_tail(self):
        v = improper_integral(F("exp(-2*sqrt(x))"), 0, math.inf)
        assert v.finite and v.value == pytest.approx(0.5, rel=1e-6)

    def test_gaussian_like_both_tails(self):
        v = improper_integral(F("exp(-1*x^2)"), -math.inf, math.inf)
        assert v.finite and v.value == pytest.approx(math.sqrt(math.pi), rel=1e-6)

    def test_log_borderline_refused(self):
        with pytest.raises(InconclusiveTail):
            improper_integral(F("1/(x*log(x)^2)"), 0, 0.5)

    def test_override_wins(self):
        v = improper_integral(F("1/(x*log(x)^2)"), 0, 0.5, override_left="finite")
        assert v.finite and v.method == "override"
        assert v.value == pytest.approx(-1 / math.log(0.5), rel=0.05)
        w = improper_integral(F("x^(-0.5)"), 0, 1, override_left="infinite")
        assert not w.finite and w.method == "override"

    def test_empty_interval(self):
        assert improper_integral(F("x"), 1, 1) == IntegralVerdict(0.0, True, "quadrature")

    @given(st.floats(min_value=-0.95, max_value=-0.2))
    @settings(max_examples=40, deadline=None)
    def test_power_family_closed_form(self, p):
        v = improper_integral(F(f"x^({p})"), 0, 1)
        assert v.finite
        assert v.value == pytest.approx(1 / (p + 1), rel=1e-5)

    @given(st.floats(min_value=-3.0, max_value=-1.1))
    @settings(max_examples=40, deadline=None)
    def test_power_family_divergent(self, p):
        assert not improper_integral(F(f"x^({p})"), 0, 1).finite
