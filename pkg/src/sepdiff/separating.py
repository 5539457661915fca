"""Separating-point analysis for a pair of diffusions on a shared interior.

Every point of the closed state space is classified as separating or
non-separating from the scale/speed ratio data: interior points need a
continuous positive scale-density ratio, a locally square-integrable
logarithmic derivative, and the speed-times-scale product of one; boundary
points additionally need matching accessibility and behavior plus finite
boundary versions of the same quantities.  From the separating set the
report derives the nearest separating points around the start value, the
structure of the time at which the two laws disconnect, and the full matrix
of absolute-continuity/singularity verdicts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from .expr import Div, Expr, Mul, Num, derivative, eval_array, fold, simplify_ratio
from .model import (
    ABSORBING, DiffusionSpec, InconclusiveTail, QuadratureFailure, Side,
    boundary_scale_gap, boundary_speed_gap, classify_boundary, improper_integral,
    scale_at,
)

__all__ = [
    "RatioProfile", "PointClass", "SeparatingSet", "AttractionRecord",
    "SeparationReport", "DomainMismatch", "Inconclusive",
    "RATIO_KINK", "BETA_NOT_L2", "PRODUCT_NOT_ONE", "ATOM_MISMATCH",
    "SCALE_LIMIT_INFINITE", "HALF_GOOD_DIVERGES", "BEHAVIOR_MISMATCH",
    "QUOTIENT_AT_BOUNDARY_FAILS", "BOUNDARY_PRODUCT_NOT_ONE", "ACCESS_MISMATCH",
    "ratio_profile", "classify_interior", "classify_boundary_pair",
    "separating_set", "diffusions_identical", "asymptotic_behavior",
    "separation_report",
]


class DomainMismatch(ValueError):
    pass


class Inconclusive(RuntimeError):
    def __init__(self, point: float, detail: str = ""):
        super().__init__(f"inconclusive classification at {point}"
                         + (f": {detail}" if detail else ""))
        self.point = point


RATIO_KINK = "RatioKink"
BETA_NOT_L2 = "BetaNotL2"
PRODUCT_NOT_ONE = "SpeedScaleProductNotOne"
ATOM_MISMATCH = "AtomMismatch"
SCALE_LIMIT_INFINITE = "ScaleLimitInfinite"
HALF_GOOD_DIVERGES = "HalfGoodIntegralDiverges"
BEHAVIOR_MISMATCH = "BoundaryBehaviorMismatch"
QUOTIENT_AT_BOUNDARY_FAILS = "DerivativeQuotientAtBoundaryFails"
BOUNDARY_PRODUCT_NOT_ONE = "BoundaryProductNotOne"
ACCESS_MISMATCH = "AccessibilityMismatch"

_TOL_EQ = 1e-9        # sampled-identity tolerance
_TOL_AMBIG = 1e-8     # above _TOL_EQ but below this is refused as inconclusive
_TOL_LIMIT = 1e-6     # tolerance for fitted boundary limits


@dataclass(frozen=True)
class RatioPiece:
    lo: float
    hi: float
    rho: Expr          # scale-density ratio s'_p / s'_q on this piece
    beta: Expr         # (rho)' / s'_p
    speed_ratio: Expr  # speed-density ratio dens_p / dens_q


@dataclass(frozen=True)
class RatioProfile:
    interval: tuple[float, float]
    pieces: tuple[RatioPiece, ...]
    kinks: tuple[float, ...]                     # points where rho jumps
    atom_ratios: tuple[tuple[float, float, float], ...]  # (loc, mass_p, mass_q)


@dataclass(frozen=True)
class PointClass:
    point: float
    separating: bool
    reasons: tuple[str, ...] = ()

    def __post_init__(self):
        if self.separating and not self.reasons:
            raise ValueError("separating verdicts must carry reasons")


@dataclass(frozen=True)
class SeparatingSet:
    components: tuple[tuple[float, float], ...]  # closed intervals, sorted

    def points(self) -> tuple[float, ...]:
        return tuple(lo for lo, hi in self.components if lo == hi)

    def contains(self, x: float) -> bool:
        return any(lo <= x <= hi for lo, hi in self.components)

    def sup_at_most(self, x: float) -> Optional[float]:
        best = None
        for lo, hi in self.components:
            if lo <= x:
                best = min(hi, x)
        return best

    def inf_at_least(self, x: float) -> Optional[float]:
        for lo, hi in self.components:
            if hi >= x:
                return max(lo, x)
        return None


@dataclass(frozen=True)
class AttractionRecord:
    scale_left: float
    scale_right: float
    prob_left: float      # converge to l at/before the exit of the interior
    prob_right: float
    oscillates: bool
    recurrent: bool


@dataclass(frozen=True)
class SeparationReport:
    identical: bool
    sep_set: SeparatingSet
    alpha: Optional[float]          # None encodes "no separating point" (Delta)
    gamma: Optional[float]
    u_desc: dict
    v_desc: dict
    r_desc: dict
    s_structure: str
    s_summary: str
    verdicts: dict


# ---------------------------------------------------------------------------
# shared machinery
# ---------------------------------------------------------------------------

def _require_same_interior(p: DiffusionSpec, q: DiffusionSpec) -> tuple[float, float]:
    if (p.space.l, p.space.r) != (q.space.l, q.space.r):
        raise DomainMismatch(
            f"interiors differ: ({p.space.l}, {p.space.r}) vs ({q.space.l}, {q.space.r})")
    return p.space.l, p.space.r


def _critical_points(p: DiffusionSpec, q: DiffusionSpec) -> list[float]:
    pts = set(p.scale.breakpoints) | set(q.scale.breakpoints)
    pts |= set(p.speed.breakpoints) | set(q.speed.breakpoints)
    pts |= {loc for loc, _ in p.speed.atoms if p.space.l < loc < p.space.r}
    pts |= {loc for loc, _ in q.speed.atoms if q.space.l < loc < q.space.r}
    return sorted(pts)


def _piece_expr(breaks: tuple[float, ...], pieces: tuple[Expr, ...], x: float,
                side: str = "right") -> Expr:
    idx = sum(1 for b in breaks if (x >= b if side == "right" else x > b))
    return pieces[idx]


def _pair_exprs(p: DiffusionSpec, q: DiffusionSpec, x: float, side: str):
    """(rho, beta, speed_ratio) on the piece at x, resolved to one side."""
    sp = _piece_expr(p.scale.breakpoints, p.scale.pieces, x, side)
    sq = _piece_expr(q.scale.breakpoints, q.scale.pieces, x, side)
    dp = _piece_expr(p.speed.breakpoints, p.speed.pieces, x, side)
    dq = _piece_expr(q.speed.breakpoints, q.speed.pieces, x, side)
    rho = simplify_ratio(sp, sq)
    beta = simplify_ratio(derivative(rho), sp)
    return rho, beta, simplify_ratio(dp, dq), sp, sq


def _sampled_equal_one(e: Expr, lo: float, hi: float, n: int = 32) -> Optional[bool]:
    """True/False for e == 1 on (lo, hi); None when inside the ambiguity band."""
    if fold(e) == Num(1.0):
        return True
    xs = lo + (hi - lo) * (np.arange(n) + 0.5) / n
    vals = eval_array(e, xs)
    if np.any(~np.isfinite(vals)):
        return False
    dev = float(np.max(np.abs(vals - 1.0)))
    if dev <= _TOL_EQ:
        return True
    if dev < _TOL_AMBIG:
        return None
    return False


def _one_sided_value(e: Expr, x: float, side: str) -> float:
    """Limit of e at x from one side (direct evaluation, else a short ladder)."""
    v = eval_array(e, np.array([x]))[0]
    if math.isfinite(v):
        return float(v)
    sgn = 1.0 if side == "right" else -1.0
    d0 = 1e-9 * max(1.0, abs(x))
    xs = x + sgn * d0 * 2.0 ** np.arange(6)
    vals = eval_array(e, xs)
    good = vals[np.isfinite(vals)]
    return float(good[0]) if len(good) else math.nan


def _neighborhood(p: DiffusionSpec, q: DiffusionSpec, x: float) -> tuple[float, float]:
    """Open interval around x clear of other critical points."""
    lo, hi = p.space.l, p.space.r
    for c in _critical_points(p, q):
        if c < x:
            lo = max(lo, c)
        elif c > x:
            hi = min(hi, c)
            break
    left = x - lo if math.isfinite(lo) else 1.0
    right = hi - x if math.isfinite(hi) else 1.0
    d = 0.5 * min(left, right, 2.0)
    return x - d, x + d


# ---------------------------------------------------------------------------
# ratio profile
# ---------------------------------------------------------------------------

def ratio_profile(p: DiffusionSpec, q: DiffusionSpec, a: float, b: float) -> RatioProfile:
    """Piecewise rho = s'_p/s'_q, beta = rho'/s'_p and speed-density ratio
    over (a, b), with ratio kinks and shared-atom ratios recorded."""
    _require_same_interior(p, q)
    cuts = [a, *[c for c in _critical_points(p, q) if a < c < b], b]
    pieces = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        mid = _witness(lo, hi)
        rho, beta, speed_ratio, _, _ = _pair_exprs(p, q, mid, "right")
        pieces.append(RatioPiece(lo=lo, hi=hi, rho=rho, beta=beta,
                                 speed_ratio=speed_ratio))
    kinks = []
    for c in cuts[1:-1]:
        left = _one_sided_value(_pair_exprs(p, q, c, "left")[0], c, "left")
        right = _one_sided_value(_pair_exprs(p, q, c, "right")[0], c, "right")
        if not (math.isfinite(left) and math.isfinite(right)) \
                or abs(left - right) > _TOL_EQ * max(1.0, abs(left), abs(right)):
            kinks.append(c)
    atoms = []
    locs = {loc for loc, _ in p.speed.atoms} | {loc for loc, _ in q.speed.atoms}
    for loc in sorted(locs):
        if a < loc < b:
            atoms.append((loc, p.speed.atom_mass(loc), q.speed.atom_mass(loc)))
    return RatioProfile(interval=(a, b), pieces=tuple(pieces), kinks=tuple(kinks),
                        atom_ratios=tuple(atoms))


def verify_ratio_identity(profile: RatioProfile, p: DiffusionSpec,
                          n_pairs: int = 8, seed: int = 0,
                          rel_tol: float = 1e-6) -> None:
    """Spot-check rho(y) - rho(x) = int_x^y beta s'_p dz on random pairs."""
    rng = np.random.default_rng(seed)
    for piece in profile.pieces:
        lo, hi = piece.lo, piece.hi
        if not (math.isfinite(lo) and math.isfinite(hi)):
            lo, hi = _witness(lo, hi) - 0.5, _witness(lo, hi) + 0.5
        for _ in range(n_pairs):
            x, y = sorted(rng.uniform(lo + 1e-6 * (hi - lo), hi - 1e-6 * (hi - lo), 2))
            if x == y:
                continue
            sp = _piece_expr(p.scale.breakpoints, p.scale.pieces, 0.5 * (x + y))
            integrand_expr = fold(Mul(piece.beta, sp))

            def f(z, e=integrand_expr):
                return eval_array(e, z)

            lhs = float(eval_array(piece.rho, np.array([y]))[0]
                        - eval_array(piece.rho, np.array([x]))[0])
            rhs = improper_integral(f, x, y).value
            if not math.isclose(lhs, rhs, rel_tol=rel_tol, abs_tol=1e-9):
                raise AssertionError(
                    f"ratio identity fails on ({x}, {y}): {lhs} vs {rhs}")


def _witness(lo: float, hi: float) -> float:
    if math.isfinite(lo) and math.isfinite(hi):
        return 0.5 * (lo + hi)
    if math.isfinite(lo):
        return lo + max(1.0, abs(lo))
    if math.isfinite(hi):
        return hi - max(1.0, abs(hi))
    return 0.0


# ---------------------------------------------------------------------------
# interior classification
# ---------------------------------------------------------------------------

def classify_interior(p: DiffusionSpec, q: DiffusionSpec, x: float) -> PointClass:
    """Separating/non-separating verdict for an interior point."""
    l, r = _require_same_interior(p, q)
    if not (l < x < r):
        raise ValueError(f"{x} is not interior to ({l}, {r})")
    lo, hi = _neighborhood(p, q, x)
    is_critical = x in _critical_points(p, q)
    reasons: list[str] = []

    rho_r, beta_r, sr_r, sp_r, _ = _pair_exprs(p, q, x, "right")
    rho_l, beta_l, sr_l, sp_l, _ = _pair_exprs(p, q, x, "left")

    # (i) the scale-density ratio is continuous, positive, finite at x
    vr = _one_sided_value(rho_r, x, "right")
    vl = _one_sided_value(rho_l, x, "left")
    ok = (math.isfinite(vr) and math.isfinite(vl) and vr > 0 and vl > 0
          and abs(vr - vl) <= _TOL_EQ * max(1.0, abs(vr), abs(vl)))
    if not ok:
        reasons.append(RATIO_KINK)

    # (ii) beta is locally square-integrable against the second scale
    for side, beta, span in (("left", beta_l, (lo, x)), ("right", beta_r, (x, hi))):
        sq = _pair_exprs(p, q, x, side)[4]

        def f(z, b=beta, s=sq):
            with np.errstate(all="ignore"):
                return eval_array(b, z) ** 2 * eval_array(s, z)

        try:
            verdict = improper_integral(f, span[0], span[1])
        except InconclusiveTail as exc:
            raise Inconclusive(x, str(exc)) from exc
        if not verdict.finite:
            if BETA_NOT_L2 not in reasons:
                reasons.append(BETA_NOT_L2)

    # (iii) the speed-ratio times scale-ratio product is one on both sides ...
    prod_ok = True
    for side, sr, rho, span in (("left", sr_l, rho_l, (lo, x)),
                                ("right", sr_r, rho_r, (x, hi))):
        res = _sampled_equal_one(fold(Mul(sr, rho)), span[0], span[1])
        if res is None:
            raise Inconclusive(x, "product of speed and scale ratios is ambiguous")
        prod_ok = prod_ok and res
    # ... and at the point itself (atoms, or the mixed density ratio at a kink)
    mp, mq = p.speed.atom_mass(x), q.speed.atom_mass(x)
    if mp > 0 or mq > 0:
        if mp == 0 or mq == 0 or not math.isclose(mp / mq * vr, 1.0, rel_tol=_TOL_EQ):
            reasons.append(ATOM_MISMATCH)
    elif is_critical and math.isfinite(vr):
        dens_p = sum(_one_sided_value(_pair_exprs(p, q, x, s)[3], x, s)
                     for s in ("left", "right"))
        dens_q_l = _one_sided_value(_pair_exprs(p, q, x, "left")[4], x, "left")
        dens_q_r = _one_sided_value(_pair_exprs(p, q, x, "right")[4], x, "right")
        dens_q = dens_q_l + dens_q_r
        if dens_q > 0 and not math.isclose((dens_p / dens_q) * vr, 1.0,
                                           rel_tol=100 * _TOL_EQ):
            prod_ok = False
    if not prod_ok:
        reasons.append(PRODUCT_NOT_ONE)

    return PointClass(point=x, separating=bool(reasons), reasons=tuple(reasons))


# ---------------------------------------------------------------------------
# boundary classification for the pair
# ---------------------------------------------------------------------------

def _fit_limit(fn, b: float, side: str) -> Optional[float]:
    """Limit of fn (positive) at a boundary via a geometric ladder; None when
    the ladder keeps moving (limit 0, infinity, or undecidable)."""
    if math.isinf(b):
        xs = (1.0 if b > 0 else -1.0) * 1e6 * 2.0 ** np.arange(12)
    else:
        sgn = 1.0 if side == "right" else -1.0
        d0 = 1e-9 * max(1.0, abs(b))
        xs = b + sgn * d0 * 2.0 ** np.arange(12)
    vals = np.array([fn(float(t)) for t in xs])
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        return None
    ly = np.log(vals)
    lx = np.log(np.abs(xs - b)) if math.isfinite(b) else np.log(np.abs(xs))
    slope = float(np.polyfit(lx, ly, 1)[0])
    if abs(slope) > 1e-3:
        return None
    return float(np.exp(np.median(ly[:4])))


def classify_boundary_pair(p: DiffusionSpec, q: DiffusionSpec,
                           boundary: Side) -> PointClass:
    """Separating/non-separating verdict for a shared boundary point."""
    _require_same_interior(p, q)
    b = p.space.l if boundary == "l" else p.space.r
    inner_side = "right" if boundary == "l" else "left"

    rp, rq = classify_boundary(p, boundary), classify_boundary(q, boundary)
    if rp.accessible != rq.accessible:
        return PointClass(b, True, (ACCESS_MISMATCH,))
    if not (math.isfinite(rp.scale_limit) and math.isfinite(rq.scale_limit)):
        return PointClass(b, True, (SCALE_LIMIT_INFINITE,))

    # a one-sided neighborhood of good interior points must exist
    crits = _critical_points(p, q)
    if boundary == "l":
        edge = min([c for c in crits if c > b], default=math.inf)
        edge = min(edge, p.space.r)
        witness_lo, witness_hi = b, edge
    else:
        edge = max([c for c in crits if c < b], default=-math.inf)
        edge = max(edge, p.space.l)
        witness_lo, witness_hi = edge, b
    witness = _boundary_witness(witness_lo, witness_hi, boundary)
    wcls = classify_interior(p, q, witness)
    if wcls.separating:
        return PointClass(b, True, wcls.reasons)

    # the weighted square-integrability of beta toward the boundary
    rho, beta, _, sp_piece, sq_piece = _pair_exprs(p, q, witness, "right")
    gap_q = boundary_scale_gap(q, boundary)

    def weighted(z: np.ndarray) -> np.ndarray:
        with np.errstate(all="ignore"):
            return gap_q(z) * eval_array(beta, z) ** 2 * eval_array(sq_piece, z)

    lo, hi = (b, witness) if boundary == "l" else (witness, b)
    tail_kw = {"tail_left" if boundary == "l" else "tail_right": True}
    try:
        half_good = improper_integral(weighted, lo, hi, **tail_kw)
    except InconclusiveTail as exc:
        raise Inconclusive(b, str(exc)) from exc
    if not half_good.finite:
        return PointClass(b, True, (HALF_GOOD_DIVERGES,))

    if not rp.accessible:
        return PointClass(b, False)

    # both accessible: absorption/reflection must match
    p_absorbing = rp.behavior == ABSORBING
    q_absorbing = rq.behavior == ABSORBING
    if p_absorbing != q_absorbing:
        return PointClass(b, True, (BEHAVIOR_MISMATCH,))
    if p_absorbing:
        return PointClass(b, False)

    # both reflecting: boundary differential quotients must exist and multiply
    # to one, and beta must be square-integrable without the gap weight
    def rho_at(t: float) -> float:
        v = eval_array(rho, np.array([t]))[0]
        return float(v)

    rho_b = _fit_limit(rho_at, b, inner_side)
    if rho_b is None:
        return PointClass(b, True, (QUOTIENT_AT_BOUNDARY_FAILS,))

    def beta_sq(z: np.ndarray) -> np.ndarray:
        with np.errstate(all="ignore"):
            return eval_array(beta, z) ** 2 * eval_array(sq_piece, z)

    try:
        eq217 = improper_integral(beta_sq, lo, hi, **tail_kw)
    except InconclusiveTail as exc:
        raise Inconclusive(b, str(exc)) from exc
    if not eq217.finite:
        return PointClass(b, True, (BETA_NOT_L2,))

    mass_p, mass_q = p.speed.atom_mass(b), q.speed.atom_mass(b)
    if (mass_p > 0) != (mass_q > 0):
        # slow versus instantaneous reflection: the mass-ratio limit is 0 or inf
        return PointClass(b, True, (BOUNDARY_PRODUCT_NOT_ONE,))
    if mass_p > 0:
        ratio_b = mass_p / mass_q
    else:
        gp, gq = boundary_speed_gap(p, boundary), boundary_speed_gap(q, boundary)

        def mass_ratio(t: float) -> float:
            num = float(gp(np.array([t]))[0])
            den = float(gq(np.array([t]))[0])
            return num / den if den > 0 else math.nan

        ratio_b = _fit_limit(mass_ratio, b, inner_side)
        if ratio_b is None:
            return PointClass(b, True, (BOUNDARY_PRODUCT_NOT_ONE,))
    if not math.isclose(ratio_b * rho_b, 1.0, rel_tol=_TOL_LIMIT):
        return PointClass(b, True, (BOUNDARY_PRODUCT_NOT_ONE,))
    return PointClass(b, False)


def _boundary_witness(lo: float, hi: float, boundary: Side) -> float:
    if boundary == "l":
        if math.isinf(lo):
            return hi - max(1.0, abs(hi)) if math.isfinite(hi) else -1.0
        span = (hi - lo) if math.isfinite(hi) else max(1.0, abs(lo))
        return lo + 0.25 * span
    if math.isinf(hi):
        return lo + max(1.0, abs(lo)) if math.isfinite(lo) else 1.0
    span = (hi - lo) if math.isfinite(lo) else max(1.0, abs(hi))
    return hi - 0.25 * span


# ---------------------------------------------------------------------------
# the separating set
# ---------------------------------------------------------------------------

def separating_set(p: DiffusionSpec, q: DiffusionSpec) -> SeparatingSet:
    """Classify critical points, witnesses between them, and both boundaries,
    then assemble the closed set of separating points."""
    l, r = _require_same_interior(p, q)
    crits = _critical_points(p, q)
    cuts = [l, *crits, r]

    marks: list[tuple[float, float, bool]] = []
    cls_l = classify_boundary_pair(p, q, "l")
    marks.append((l, l, cls_l.separating))
    for c in crits:
        marks.append((c, c, classify_interior(p, q, c).separating))
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        w = _witness(lo, hi)
        sep = classify_interior(p, q, w).separating
        marks.append((lo, hi, sep))
    cls_r = classify_boundary_pair(p, q, "r")
    marks.append((r, r, cls_r.separating))

    marks.sort(key=lambda m: (m[0], m[1]))
    components: list[list[float]] = []
    for lo, hi, sep in marks:
        if not sep:
            continue
        if components and lo <= components[-1][1]:
            components[-1][1] = max(components[-1][1], hi)
        else:
            components.append([lo, hi])
    return SeparatingSet(components=tuple((a, b) for a, b in components))


# ---------------------------------------------------------------------------
# identity up to gauge
# ---------------------------------------------------------------------------

def _sampled_equal(e1: Expr, e2: Expr, lo: float, hi: float, n: int = 64) -> bool:
    if fold(e1) == fold(e2):
        return True
    if not math.isfinite(lo):
        lo = min(hi - 1.0, -1.0) if math.isfinite(hi) else -8.0
    if not math.isfinite(hi):
        hi = max(lo + 1.0, 1.0)
    xs = lo + (hi - lo) * (np.arange(n) + 0.5) / n
    v1, v2 = eval_array(e1, xs), eval_array(e2, xs)
    if np.any(~np.isfinite(v1)) or np.any(~np.isfinite(v2)):
        return False
    scale = np.maximum(1.0, np.maximum(np.abs(v1), np.abs(v2)))
    return bool(np.max(np.abs(v1 - v2) / scale) <= _TOL_EQ)


def diffusions_identical(p: DiffusionSpec, q: DiffusionSpec) -> bool:
    """True iff the specs present the same law: equal state spaces and
    (s_p, m_p) = (k s_q + const, m_q / k) for some k > 0."""
    if (p.space != q.space):
        return False
    c = p.scale.anchor_point
    lo, hi = p.space.l, p.space.r
    x1 = c + 0.5 * ((hi - c) if math.isfinite(hi) else 1.0)
    s_p = scale_at(p, x1) - scale_at(p, c)
    s_q = scale_at(q, x1) - scale_at(q, c)
    if not (s_p > 0 and s_q > 0):
        return False
    k = s_p / s_q
    cuts = [lo, *_critical_points(p, q), hi]
    for seg_lo, seg_hi in zip(cuts[:-1], cuts[1:]):
        w = _witness(seg_lo, seg_hi)
        sp = _piece_expr(p.scale.breakpoints, p.scale.pieces, w)
        sq = _piece_expr(q.scale.breakpoints, q.scale.pieces, w)
        if not _sampled_equal(sp, fold(Mul(Num(k), sq)), seg_lo, seg_hi):
            return False
        dp = _piece_expr(p.speed.breakpoints, p.speed.pieces, w)
        dq = _piece_expr(q.speed.breakpoints, q.speed.pieces, w)
        if not _sampled_equal(dp, fold(Mul(Num(1.0 / k), dq)), seg_lo, seg_hi):
            return False
    locs = {loc for loc, _ in p.speed.atoms} | {loc for loc, _ in q.speed.atoms}
    for loc in locs:
        mp, mq = p.speed.atom_mass(loc), q.speed.atom_mass(loc)
        if math.isinf(mp) and math.isinf(mq):
            continue
        if not math.isclose(mp, mq / k, rel_tol=_TOL_EQ, abs_tol=0.0):
            return False
    return True


# ---------------------------------------------------------------------------
# path asymptotics
# ---------------------------------------------------------------------------

def asymptotic_behavior(spec: DiffusionSpec, x0: float) -> AttractionRecord:
    """Attraction probabilities toward each end and recurrence, from the four
    scale-limit cases plus the reflecting-boundary recurrence criterion."""
    s_l, s_r = scale_at(spec, spec.space.l), scale_at(spec, spec.space.r)
    s_x = scale_at(spec, x0)
    rl, rr = classify_boundary(spec, "l"), classify_boundary(spec, "r")
    refl_l = rl.accessible and rl.behavior != ABSORBING
    refl_r = rr.accessible and rr.behavior != ABSORBING
    recurrent = ((math.isinf(s_l) or refl_l) and (math.isinf(s_r) or refl_r))
    if math.isinf(s_l) and math.isinf(s_r):
        pl, pr, osc = 0.0, 0.0, True
    elif math.isinf(s_r):
        pl, pr, osc = 1.0, 0.0, False
    elif math.isinf(s_l):
        pl, pr, osc = 0.0, 1.0, False
    else:
        pl = (s_r - s_x) / (s_r - s_l)
        pr = 1.0 - pl
        osc = False
    return AttractionRecord(scale_left=s_l, scale_right=s_r, prob_left=pl,
                            prob_right=pr, oscillates=osc, recurrent=recurrent)


def _reach_prob(spec: DiffusionSpec, x0: float, target: float, side: str) -> float:
    """P(the path's liminf/limsup attains `target` before/at its hitting time)."""
    if target == x0:
        return 1.0
    s_x = scale_at(spec, x0)
    if side == "left":
        rep = classify_boundary(spec, "r")
        if rep.accessible and rep.behavior != ABSORBING:
            return 1.0
        s_far = scale_at(spec, spec.space.r)
        if math.isinf(s_far):
            return 1.0
        s_t = scale_at(spec, target)
        if math.isinf(s_t):
            return 0.0
        return (s_far - s_x) / (s_far - s_t)
    rep = classify_boundary(spec, "l")
    if rep.accessible and rep.behavior != ABSORBING:
        return 1.0
    s_far = scale_at(spec, spec.space.l)
    if math.isinf(s_far):
        return 1.0
    s_t = scale_at(spec, target)
    if math.isinf(s_t):
        return 0.0
    return (s_x - s_far) / (s_t - s_far)


# ---------------------------------------------------------------------------
# the separation report
# ---------------------------------------------------------------------------

def separation_report(p: DiffusionSpec, q: DiffusionSpec, x0: float) -> SeparationReport:
    l, r = _require_same_interior(p, q)
    if not (p.space.contains(x0) and q.space.contains(x0)):
        raise ValueError(f"start value {x0} must lie in both state spaces")

    identical = diffusions_identical(p, q)
    A = separating_set(p, q)
    alpha = A.sup_at_most(x0)
    gamma = A.inf_at_least(x0)

    def hit_desc(point: Optional[float], side: str) -> dict:
        if point is None:
            return {"kind": "delta"}
        if point == x0:
            return {"kind": "zero"}
        return {
            "kind": "hitting",
            "point": point,
            "reach_prob_p": _reach_prob(p, x0, point, side),
            "reach_prob_q": _reach_prob(q, x0, point, side),
            "note": "counts asymptotic convergence to the point as reaching it",
        }

    u_desc = hit_desc(alpha, "left")
    v_desc = hit_desc(gamma, "right")

    rl, rr = classify_boundary(p, "l"), classify_boundary(p, "r")
    both_reflecting = (rl.accessible and rl.behavior != ABSORBING
                       and rr.accessible and rr.behavior != ABSORBING)
    r_infinite = alpha is None and gamma is None and both_reflecting
    r_desc = {"kind": "infinity"} if r_infinite else {"kind": "delta"}

    x0_in_A = A.contains(x0)
    if identical:
        s_structure = s_summary = "δ"
    elif x0_in_A:
        s_structure = s_summary = "0"
    elif alpha is None and gamma is None:
        s_structure = s_summary = "∞" if r_infinite else "δ"
    else:
        s_structure = "U ∧ V ∧ R"
        finite_hits = [pt for pt in (alpha, gamma)
                       if pt is not None and math.isfinite(pt)]
        if len(finite_hits) == 1:
            s_summary = f"T_{finite_hits[0]:g}-type"
        elif len(finite_hits) == 2:
            s_summary = f"min(T_{finite_hits[0]:g},T_{finite_hits[1]:g})-type"
        else:
            s_summary = "boundary-attraction-type"

    verdicts = _verdicts(p, q, x0, A, alpha, gamma, identical, r_infinite,
                         u_desc, v_desc)
    return SeparationReport(identical=identical, sep_set=A, alpha=alpha,
                            gamma=gamma, u_desc=u_desc, v_desc=v_desc,
                            r_desc=r_desc, s_structure=s_structure,
                            s_summary=s_summary, verdicts=verdicts)


def _points_of_J_nonseparating(spec: DiffusionSpec, A: SeparatingSet) -> bool:
    """No separating point belongs to the (possibly half-open) state space."""
    for lo, hi in A.components:
        for t in {lo, hi}:
            if spec.space.contains(t):
                return False
        interior_probe = _witness(max(lo, spec.space.l), min(hi, spec.space.r))
        if lo < hi and spec.space.l < interior_probe < spec.space.r \
                and lo <= interior_probe <= hi:
            return False
    return True


def _abs_cont_global(spec: DiffusionSpec, A: SeparatingSet) -> bool:
    """The three-clause global absolute-continuity criterion for spec ≪ other."""
    l, r = spec.space.l, spec.space.r
    for lo, hi in A.components:
        if lo < hi and not (hi <= l or lo >= r):
            return False  # a separating interval meets the interior
        if lo == hi and l < lo < r:
            return False
    sep_l, sep_r = A.contains(l), A.contains(r)
    s_l, s_r = scale_at(spec, l), scale_at(spec, r)
    ok_l = (not sep_l) or (math.isinf(s_l) and not sep_r)
    ok_r = (not sep_r) or (math.isinf(s_r) and not sep_l)
    if not (ok_l and ok_r):
        return False
    if not sep_l and not sep_r:
        rl, rr = classify_boundary(spec, "l"), classify_boundary(spec, "r")
        refl_l = rl.accessible and rl.behavior != ABSORBING
        refl_r = rr.accessible and rr.behavior != ABSORBING
        if refl_l and refl_r:
            return False
    return True


def _verdicts(p, q, x0, A, alpha, gamma, identical, r_infinite, u_desc, v_desc) -> dict:
    if identical:
        return {"p_lloc_q": True, "q_lloc_p": True, "p_ll_q": True, "q_ll_p": True,
                "equivalent_loc": True, "equivalent": True,
                "singular_f0": False, "singular": "no",
                "p_prob_singular": 0.0, "q_prob_singular": 0.0}

    p_lloc_q = _points_of_J_nonseparating(p, A)
    q_lloc_p = _points_of_J_nonseparating(q, A)
    p_ll_q = _abs_cont_global(p, A)
    q_ll_p = _abs_cont_global(q, A)
    singular_f0 = A.contains(x0)

    # probability that separation happens in (possibly infinite) finite time
    def prob_singular(spec) -> float:
        if singular_f0 or r_infinite:
            return 1.0
        if alpha is not None and gamma is not None:
            return 1.0
        if alpha is not None:
            return _reach_prob(spec, x0, alpha, "left")
        if gamma is not None:
            return _reach_prob(spec, x0, gamma, "right")
        return 0.0

    pp, pq = prob_singular(p), prob_singular(q)
    if pp >= 1.0:
        singular = "yes"
    elif pp <= 0.0:
        singular = "no"
    else:
        singular = "mixed"
    return {"p_lloc_q": p_lloc_q, "q_lloc_p": q_lloc_p,
            "p_ll_q": p_ll_q, "q_ll_p": q_ll_p,
            "equivalent_loc": p_lloc_q and q_lloc_p,
            "equivalent": p_ll_q and q_ll_p,
            "singular_f0": singular_f0, "singular": singular,
            "p_prob_singular": pp, "q_prob_singular": pq}
