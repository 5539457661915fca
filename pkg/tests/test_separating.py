import math

import pytest

from sepdiff.catalog import (
    brownian_halfline, brownian_motion, make_spec, reflected_drift_brownian,
    skew_brownian, sqrt_pushed_brownian, squared_bessel, sticky_brownian,
)
from sepdiff.model import affine_gauge
from sepdiff.separating import (
    ATOM_MISMATCH, BETA_NOT_L2, PRODUCT_NOT_ONE, RATIO_KINK,
    DomainMismatch, asymptotic_behavior, classify_boundary_pair,
    classify_interior, diffusions_identical, ratio_profile, separating_set,
    separation_report, verify_ratio_identity,
)

INF = math.inf


def points(A):
    return A.components


class TestInterior:
    def test_sticky_atom_mismatch(self):
        p, q = sticky_brownian(1.0), sticky_brownian(2.0)
        cls = classify_interior(p, q, 0.0)
        assert cls.separating and cls.reasons == (ATOM_MISMATCH,)
        assert not classify_interior(p, q, 1.0).separating
        assert not classify_interior(p, q, -0.3).separating

    def test_skew_kink_and_product(self):
        p, q = skew_brownian(0.3), skew_brownian(0.7)
        cls = classify_interior(p, q, 0.0)
        assert cls.separating
        assert RATIO_KINK in cls.reasons and PRODUCT_NOT_ONE in cls.reasons
        assert not classify_interior(p, q, 0.5).separating

    def test_drift_difference_all_good(self):
        # same diffusion coefficient, bounded drift difference
        p = brownian_motion()
        q = make_spec(-INF, INF, False, False, "exp(-2*x)", "exp(2*x)",
                      label="unit drift BM")
        for x in (-1.0, 0.0, 2.0):
            assert not classify_interior(p, q, x).separating


class TestEngelbertSchmidtReduction:
    """sigma = sigma~ = 1 with drift difference b~ = |x|^p around the origin:
    the interior criterion must match (b~ - b)^2 / sigma^4 in L1_loc."""

    def _drift_pair(self, pos_src, neg_src, pos_speed, neg_speed):
        q = make_spec(-INF, INF, False, False,
                      scale_pieces=(neg_src, pos_src),
                      speed_pieces=(neg_speed, pos_speed),
                      breakpoints=(0.0,), label="singular drift")
        return brownian_motion(), q

    def test_square_root_singularity_separates(self):
        # b~ = |x|^(-1/2): (b~)^2 = 1/|x| fails local integrability at 0
        p, q = self._drift_pair("exp(-4*sqrt(x))", "exp(4*sqrt(abs(x)))",
                                "exp(4*sqrt(x))", "exp(-4*sqrt(abs(x)))")
        cls = classify_interior(p, q, 0.0)
        assert cls.separating and BETA_NOT_L2 in cls.reasons
        assert not classify_interior(p, q, 1.0).separating

    def test_quarter_power_drift_is_good(self):
        # b~ = |x|^(1/4): (b~)^2 = |x|^(1/2) is locally integrable
        p, q = self._drift_pair("exp(-1.6*x^1.25)", "exp(1.6*abs(x)^1.25)",
                                "exp(1.6*x^1.25)", "exp(-1.6*abs(x)^1.25)")
        assert not classify_interior(p, q, 0.0).separating


class TestSeparatingSet:
    def test_sticky_pair(self):
        A = separating_set(sticky_brownian(1.0), sticky_brownian(2.0))
        assert points(A) == ((-INF, -INF), (0.0, 0.0), (INF, INF))

    def test_sticky_same(self):
        A = separating_set(sticky_brownian(1.0), sticky_brownian(1.0))
        assert points(A) == ((-INF, -INF), (INF, INF))

    def test_skew_pair(self):
        A = separating_set(skew_brownian(0.3), skew_brownian(0.7))
        assert points(A) == ((-INF, -INF), (0.0, 0.0), (INF, INF))

    @pytest.mark.parametrize("m0", [0.0, 0.5, INF])
    @pytest.mark.parametrize("m0t", [0.0, 0.5, INF])
    def test_bessel_pair_all_atom_combos(self, m0, m0t):
        A = separating_set(squared_bessel(0.5, m0), squared_bessel(1.5, m0t))
        assert points(A) == ((0.0, 0.0), (INF, INF))

    def test_bessel_accessible_vs_not(self):
        A = separating_set(squared_bessel(1.0), squared_bessel(3.0))
        assert points(A) == ((0.0, 0.0), (INF, INF))

    def test_exp_sqrt_pair(self):
        both_inf = separating_set(sqrt_pushed_brownian(INF), brownian_halfline(INF))
        assert points(both_inf) == ((INF, INF),)
        for m0, m0t in [(0.5, INF), (INF, 0.5), (0.0, 0.0)]:
            A = separating_set(sqrt_pushed_brownian(m0), brownian_halfline(m0t))
            assert points(A) == ((0.0, 0.0), (INF, INF)), (m0, m0t)

    def test_reflected_drift_pair_empty(self):
        A = separating_set(reflected_drift_brownian(1.0), reflected_drift_brownian(0.0))
        assert points(A) == ()

    def test_domain_mismatch(self):
        with pytest.raises(DomainMismatch):
            separating_set(brownian_motion(), squared_bessel(1.0))


class TestSymmetryAndInvariance:
    PAIRS = [
        (sticky_brownian(1.0), sticky_brownian(2.0)),
        (skew_brownian(0.3), skew_brownian(0.7)),
        (squared_bessel(1.0), squared_bessel(3.0)),
        (sqrt_pushed_brownian(INF), brownian_halfline(INF)),
        (reflected_drift_brownian(1.0), reflected_drift_brownian(0.0)),
    ]

    def test_swap_symmetry(self):
        for p, q in self.PAIRS:
            assert separating_set(p, q).components == separating_set(q, p).components

    def test_gauge_invariance(self):
        for p, q in self.PAIRS:
            base = separating_set(p, q).components
            assert separating_set(affine_gauge(p, 2.0, -1.0), q).components == base
            assert separating_set(p, affine_gauge(q, 0.5, 4.0)).components == base

    def test_homeomorphism_pushforward(self):
        # push the sticky pair through phi = exp: scale s o log has density 1/y,
        # Lebesgue speed maps to dy/y, and the atom moves to phi(0) = 1
        def pushed(gamma):
            return make_spec(0.0, INF, False, False, "1/x", "1/x",
                             anchor=(1.0, 0.0), atoms=((1.0, gamma),),
                             label=f"exp-pushed sticky {gamma:g}")
        A = separating_set(pushed(1.0), pushed(2.0))
        assert points(A) == ((0.0, 0.0), (1.0, 1.0), (INF, INF))

    def test_shared_scale_different_speed_separates(self):
        # same scale, speed doubled: some point of J must separate
        p = brownian_motion()
        q = make_spec(-INF, INF, False, False, "1", "2", label="double speed")
        A = separating_set(p, q)
        assert any(spec_pt in [p for pr in A.components for p in pr]
                   or lo < hi for (lo, hi) in A.components
                   for spec_pt in (0.0,)) or A.contains(0.0)
        assert A.contains(0.0)

    def test_shared_speed_different_scale_separates(self):
        p = brownian_motion()
        q = make_spec(-INF, INF, False, False, "1+x^2", "1", label="bent scale")
        assert separating_set(p, q).contains(1.0)


class TestIdentity:
    def test_affine_gauge_identical(self):
        p = sticky_brownian(0.5)
        assert diffusions_identical(p, affine_gauge(p, 2.0, 3.0))

    def test_different_gamma_not_identical(self):
        assert not diffusions_identical(sticky_brownian(1.0), sticky_brownian(2.0))

    def test_drift_not_identical(self):
        q = make_spec(-INF, INF, False, False, "exp(-2*x)", "exp(2*x)", label="drift")
        assert not diffusions_identical(brownian_motion(), q)


class TestAsymptotics:
    def test_brownian_oscillates(self):
        rec = asymptotic_behavior(brownian_motion(), 0.0)
        assert rec.oscillates and rec.recurrent
        assert rec.prob_left == rec.prob_right == 0.0

    def test_scale_finite_both_sides(self):
        spec = sqrt_pushed_brownian(INF)  # s(0), s(inf) both finite
        rec = asymptotic_behavior(spec, 1.0)
        assert not rec.oscillates and not rec.recurrent
        assert rec.prob_left == pytest.approx(
            ( (lambda s: ( s(INF) - s(1.0)) / (s(INF) - s(0.0)))
              (lambda t: __import__("sepdiff.model", fromlist=["scale_at"]).scale_at(spec, t))),
            rel=1e-9)
        assert rec.prob_left + rec.prob_right == pytest.approx(1.0)

    def test_reflected_recurrent(self):
        rec = asymptotic_behavior(reflected_drift_brownian(1.0), 0.5)
        assert rec.recurrent


class TestRatioProfile:
    def test_sticky_profile(self):
        prof = ratio_profile(sticky_brownian(1.0), sticky_brownian(2.0), -2.0, 2.0)
        assert prof.kinks == ()
        assert prof.atom_ratios == ((0.0, 1.0, 2.0),)
        for piece in prof.pieces:
            from sepdiff.expr import Num
            assert piece.rho == Num(1.0)

    def test_skew_profile_kink(self):
        prof = ratio_profile(skew_brownian(0.3), skew_brownian(0.7), -1.0, 1.0)
        assert prof.kinks == (0.0,)

    def test_ratio_identity_spot_checks(self):
        p, q = squared_bessel(1.0), squared_bessel(3.0)
        prof = ratio_profile(p, q, 0.5, 4.0)
        verify_ratio_identity(prof, p, seed=7)


class TestReports:
    def test_identical_delta(self):
        rep = separation_report(brownian_motion(), brownian_motion(), 0.0)
        assert rep.identical and rep.s_structure == "δ"

    def test_sticky_start_at_atom(self):
        rep = separation_report(sticky_brownian(1.0), sticky_brownian(2.0), 0.0)
        assert rep.s_structure == "0"
        assert rep.verdicts["singular_f0"] is True

    def test_sticky_start_away(self):
        rep = separation_report(sticky_brownian(1.0), sticky_brownian(2.0), 1.0)
        assert rep.s_summary == "T_0-type"
        assert rep.alpha == 0.0 and rep.gamma == INF
        assert rep.verdicts["singular_f0"] is False
        assert rep.verdicts["equivalent_loc"] is False
        assert rep.verdicts["singular"] == "yes"

    def test_reflected_drift_r_infinite(self):
        rep = separation_report(reflected_drift_brownian(1.0),
                                reflected_drift_brownian(0.0), 0.5)
        assert rep.s_structure == "∞"
        assert rep.r_desc == {"kind": "infinity"}
        v = rep.verdicts
        assert v["equivalent_loc"] and not v["equivalent"] and v["singular"] == "yes"

    def test_exp_sqrt_mutual_arrangement_absorbing(self):
        rep = separation_report(sqrt_pushed_brownian(INF), brownian_halfline(INF), 1.0)
        v = rep.verdicts
        assert v["equivalent_loc"] is True
        assert v["q_ll_p"] is True       # Brownian law dominated by the pushed one
        assert v["p_ll_q"] is False
        assert v["singular"] == "mixed"
        assert 0.0 < v["p_prob_singular"] < 1.0
        assert v["q_prob_singular"] == 0.0

    def test_exp_sqrt_mutual_arrangement_reflecting(self):
        rep = separation_report(sqrt_pushed_brownian(0.5), brownian_halfline(INF), 1.0)
        v = rep.verdicts
        assert not v["p_lloc_q"] and not v["q_lloc_p"]
        assert v["singular_f0"] is False  # x0 = 1 is not separating
        assert v["singular"] == "yes"

    def test_bessel_report(self):
        rep = separation_report(squared_bessel(1.0), squared_bessel(3.0), 1.0)
        assert points(rep.sep_set) == ((0.0, 0.0), (INF, INF))
        assert rep.s_summary == "T_0-type"
