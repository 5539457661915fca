import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sepdiff.catalog import (
    brownian_absorbed, brownian_halfline, brownian_motion, drifted_brownian_absorbed,
    geometric_like, make_spec, reflected_drift_brownian, skew_brownian,
    sqrt_pushed_brownian, squared_bessel, sticky_brownian,
)
from sepdiff.model import (
    EXIT, ENTRANCE, NATURAL, REGULAR, ABSORBING, INSTANT_REFLECT, NOT_APPLICABLE,
    affine_gauge, classify_boundary, exit_split, expected_exit_time, green_kernel,
    hitting_probability, scale_at, speed_of, uv_values, validate_spec,
)

INF = math.inf


def boundary_corpus():
    """Twelve specs spanning the boundary taxonomy."""
    return [
        brownian_motion(), sticky_brownian(0.5), skew_brownian(0.3),
        squared_bessel(0.5), squared_bessel(1.0), squared_bessel(1.5),
        squared_bessel(2.0), squared_bessel(3.0),
        geometric_like(1, 1), drifted_brownian_absorbed(1.0),
        sqrt_pushed_brownian(0.0), reflected_drift_brownian(1.0),
    ]


class TestValidate:
    def test_brownian_motion_valid(self):
        assert validate_spec(brownian_motion()) == []

    def test_corpus_valid(self):
        for spec in boundary_corpus():
            assert validate_spec(spec) == [], spec.label

    def test_inaccessible_endpoint_marked_closed(self):
        # Bessel gamma=3 has an entrance origin, so closing it is a mismatch
        bad = make_spec(0.0, INF, True, False, "x^(-2)", "x^2",
                        anchor=(1.0, 0.0), label="bad bessel")
        codes = {v.code for v in validate_spec(bad)}
        assert "AccessibilityMismatch" in codes

    def test_negative_density(self):
        bad = make_spec(0.0, 2.0, True, True, "1", "x - 1",
                        anchor=(1.0, 0.0), label="negative density")
        codes = {v.code for v in validate_spec(bad)}
        assert "NegativeDensity" in codes

    def test_exit_boundary_needs_infinite_mass(self):
        # s' = x^2 with m = x^-2 dx makes the origin an exit boundary
        # (u < inf, v = inf); a finite atom there must be rejected
        spec = make_spec(0.0, INF, True, False, "x^2", "x^(-2)",
                         anchor=(1.0, 0.0), atoms=((0.0, 3.0),), label="finite exit atom")
        assert classify_boundary(spec, "l").kind == EXIT
        codes = {v.code for v in validate_spec(spec)}
        assert "ExitBoundaryNeedsInfiniteMass" in codes


class TestScale:
    def test_identity_scale(self):
        assert scale_at(brownian_motion(), 3.0) == pytest.approx(3.0, rel=1e-12)

    def test_inverse_square_tail(self):
        spec = make_spec(0.0, INF, False, False, "x^(-2)", "1",
                         anchor=(1.0, 0.0), label="inverse-square scale")
        assert scale_at(spec, INF) == pytest.approx(1.0, rel=1e-9)

    def test_exp_sqrt_scale_limit_finite(self):
        assert math.isfinite(scale_at(sqrt_pushed_brownian(0.0), INF))

    def test_drifted_bm_scale_limit(self):
        assert scale_at(drifted_brownian_absorbed(1.0), INF) == pytest.approx(0.5, abs=1e-6)


class TestSpeed:
    def test_lebesgue(self):
        assert speed_of(brownian_motion(), 0, 2).value == pytest.approx(2.0, rel=1e-9)

    def test_sticky_atom(self):
        v = speed_of(sticky_brownian(0.5), -1, 1, include_a=True, include_b=True)
        assert v.value == pytest.approx(2.5, rel=1e-9)

    def test_bessel3_cube(self):
        v = speed_of(squared_bessel(3.0), 0, 1)
        assert v.value == pytest.approx(1 / 3, rel=1e-8)

    def test_absorbing_boundary_mass(self):
        v = speed_of(brownian_absorbed(), 0, 1, include_a=True)
        assert not v.finite


class TestGreenKernel:
    def test_spec_value(self):
        assert green_kernel(brownian_motion(), -1, 1, 0, 0.5) == pytest.approx(0.5, rel=1e-12)

    def test_outside_interval(self):
        assert green_kernel(brownian_motion(), -1, 1, 0, 1.5) == 0.0

    @given(st.floats(min_value=-0.99, max_value=0.99),
           st.floats(min_value=-0.99, max_value=0.99))
    @settings(max_examples=200, deadline=None)
    def test_symmetry_and_positivity(self, x, y):
        bm = brownian_motion()
        g1 = green_kernel(bm, -1, 1, x, y)
        g2 = green_kernel(bm, -1, 1, y, x)
        assert g1 == pytest.approx(g2, rel=1e-10, abs=1e-12)
        assert g1 >= 0


class TestHitting:
    def test_linear_scale(self):
        assert hitting_probability(brownian_motion(), 0, 0.5, 2) == pytest.approx(0.25)

    def test_bessel3_hand_value(self):
        # s(x) = -1/x: (s(1.5)-s(1))/(s(2)-s(1)) = (1/3)/(1/2) = 2/3
        p = hitting_probability(squared_bessel(3.0), 1.0, 1.5, 2.0)
        assert p == pytest.approx(2 / 3, rel=1e-9)

    @given(st.floats(min_value=0.05, max_value=1.95))
    @settings(max_examples=100, deadline=None)
    def test_complement_identity_exact(self, x):
        bm = sticky_brownian(0.5)
        down, up = exit_split(bm, 0.0, x, 2.0)
        assert up + down == 1.0
        assert 0 < up < 1
        # the complement agrees with its scale-ratio formula
        sa, sx, sb = (scale_at(bm, t) for t in (0.0, x, 2.0))
        assert down == pytest.approx((sb - sx) / (sb - sa), rel=1e-12)

    def test_monotone_in_start(self):
        bm = brownian_motion()
        ps = [hitting_probability(bm, 0, x, 2) for x in (0.3, 0.9, 1.5)]
        assert ps == sorted(ps)


class TestExitTime:
    def test_brownian_unit_interval(self):
        # closed form (b-x)(x-a) for Brownian motion
        v = expected_exit_time(brownian_motion(), -1, 0, 1)
        assert v.value == pytest.approx(1.0, rel=1e-9)

    def test_brownian_asymmetric(self):
        v = expected_exit_time(brownian_motion(), -1, 0.5, 2)
        assert v.value == pytest.approx(1.5 * 1.5, rel=1e-9)

    def test_sticky_atom_term(self):
        v = expected_exit_time(sticky_brownian(0.5), -1, 0, 1)
        assert v.value == pytest.approx(1.5, rel=1e-9)

    def test_vanishes_at_edge(self):
        v = expected_exit_time(brownian_motion(), -1, -0.9999, 1)
        assert v.value < 1e-3


class TestBoundaries:
    def test_bm_natural(self):
        for side in ("l", "r"):
            rep = classify_boundary(brownian_motion(), side)
            assert rep.kind == NATURAL and not rep.accessible
            assert rep.behavior == NOT_APPLICABLE

    def test_bessel_regular_vs_inaccessible(self):
        for gamma in (0.5, 1.0, 1.5):
            assert classify_boundary(squared_bessel(gamma), "l").kind == REGULAR
        for gamma in (2.0, 3.0):
            rep = classify_boundary(squared_bessel(gamma), "l")
            assert not rep.accessible

    def test_bessel_uv_detail(self):
        u, v = uv_values(squared_bessel(1.0), "l")
        assert math.isfinite(u) and math.isfinite(v)
        u3, _ = uv_values(squared_bessel(3.0), "l")
        assert math.isinf(u3)

    def test_exp_sqrt_origin_regular(self):
        for m0 in (0.0, INF):
            rep = classify_boundary(sqrt_pushed_brownian(m0), "l")
            assert rep.kind == REGULAR
        assert classify_boundary(sqrt_pushed_brownian(INF), "l").behavior == ABSORBING
        assert classify_boundary(sqrt_pushed_brownian(0.0), "l").behavior == INSTANT_REFLECT

    def test_implication_chain_corpus(self):
        # u < inf forces |s(b)| < inf; v < inf forces finite interior mass near b
        for spec in boundary_corpus():
            for side in ("l", "r"):
                rep = classify_boundary(spec, side)
                if math.isfinite(rep.u_value):
                    assert math.isfinite(rep.scale_limit), (spec.label, side)
                if math.isfinite(rep.v_value):
                    b = spec.space.l if side == "l" else spec.space.r
                    c = spec.scale.anchor_point
                    lo, hi = (b, c) if side == "l" else (c, b)
                    assert speed_of(spec, lo, hi, False, False).finite, (spec.label, side)


class TestAffineGauge:
    @pytest.mark.parametrize("k,shift", [(2.0, 3.0), (0.25, -1.0)])
    def test_reports_invariant(self, k, shift):
        for spec in (brownian_motion(), sticky_brownian(0.5), squared_bessel(1.0)):
            other = affine_gauge(spec, k, shift)
            for side in ("l", "r"):
                a, b = classify_boundary(spec, side), classify_boundary(other, side)
                assert a.kind == b.kind and a.behavior == b.behavior, spec.label

    def test_hitting_and_exit_invariant(self):
        spec = sticky_brownian(0.5)
        other = affine_gauge(spec, 2.0, 3.0)
        assert hitting_probability(spec, -1, 0.25, 1) == pytest.approx(
            hitting_probability(other, -1, 0.25, 1), rel=1e-9)
        assert expected_exit_time(spec, -1, 0, 1).value == pytest.approx(
            expected_exit_time(other, -1, 0, 1).value, rel=1e-8)
