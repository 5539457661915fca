"""Regular one-dimensional diffusions given by scale density and speed measure.

A diffusion is specified by a state space, a piecewise scale density s' with
an anchor value, and a speed measure (piecewise Lebesgue density plus point
atoms).  The operations here are the single-diffusion layer: interval speed
mass, the Green kernel of an interval, hitting probabilities, expected exit
times, the u/v boundary integrals, and the four-way boundary classification
with its accessibility cross-check.

Normalization: the speed measure of standard Brownian motion (s(x)=x) is
Lebesgue measure, and the Green kernel carries the factor 2.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Callable, Literal, Optional

import numpy as np

from .expr import Expr, eval_array, fold, Mul, Num, parse_expression, to_source
from .quadrature import (
    InconclusiveTail, IntegralVerdict, QuadratureFailure, adaptive_quad,
    improper_integral,
)

__all__ = [
    "StateSpace", "ScaleFunction", "SpeedMeasure", "Override", "DiffusionSpec",
    "BoundaryReport", "IntegralVerdict", "Violation",
    "InconclusiveTail", "QuadratureFailure", "InternalInconsistency",
    "validate_spec", "scale_at", "speed_of", "green_kernel",
    "hitting_probability", "exit_split", "expected_exit_time", "uv_values",
    "classify_boundary", "improper_integral", "affine_gauge",
    "REGULAR", "EXIT", "ENTRANCE", "NATURAL",
    "ABSORBING", "SLOW_REFLECT", "INSTANT_REFLECT", "NOT_APPLICABLE",
]


class InternalInconsistency(RuntimeError):
    """The u/v route and the Eq.-style accessibility cross-check disagree."""


REGULAR, EXIT, ENTRANCE, NATURAL = "regular", "exit", "entrance", "natural"
ABSORBING = "absorbing"
SLOW_REFLECT = "slowly-reflecting"
INSTANT_REFLECT = "instantaneously-reflecting"
NOT_APPLICABLE = "not-applicable"

Side = Literal["l", "r"]


# ---------------------------------------------------------------------------
# Spec types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StateSpace:
    l: float
    r: float
    l_closed: bool
    r_closed: bool

    def __post_init__(self):
        if not self.l < self.r:
            raise ValueError(f"need l < r, got {self.l} >= {self.r}")
        if self.l_closed and not math.isfinite(self.l):
            raise ValueError("closed left endpoint must be finite")
        if self.r_closed and not math.isfinite(self.r):
            raise ValueError("closed right endpoint must be finite")

    def contains(self, x: float) -> bool:
        if x == self.l:
            return self.l_closed
        if x == self.r:
            return self.r_closed
        return self.l < x < self.r


@dataclass(frozen=True)
class ScaleFunction:
    """Piecewise density s' > 0 with kinks only at breakpoints; s is the
    anchored primitive, continuous and strictly increasing on the interior."""
    breakpoints: tuple[float, ...]
    pieces: tuple[Expr, ...]
    anchor_point: float
    anchor_value: float

    def __post_init__(self):
        if len(self.pieces) != len(self.breakpoints) + 1:
            raise ValueError("need exactly one density piece per open interval")
        if list(self.breakpoints) != sorted(set(self.breakpoints)):
            raise ValueError("breakpoints must be sorted and unique")


@dataclass(frozen=True)
class Override:
    """User ruling for an improper tail of a speed-measure integral."""
    point: float
    side: Literal["left", "right"]
    finite: bool


@dataclass(frozen=True)
class SpeedMeasure:
    breakpoints: tuple[float, ...]
    pieces: tuple[Expr, ...]
    atoms: tuple[tuple[float, float], ...] = ()  # (location, mass); mass may be inf
    integrability_overrides: tuple[Override, ...] = ()

    def __post_init__(self):
        if len(self.pieces) != len(self.breakpoints) + 1:
            raise ValueError("need exactly one density piece per open interval")
        if list(self.breakpoints) != sorted(set(self.breakpoints)):
            raise ValueError("breakpoints must be sorted and unique")
        locs = [a for a, _ in self.atoms]
        if list(locs) != sorted(set(locs)):
            raise ValueError("atom locations must be sorted and unique")

    def atom_mass(self, x: float) -> float:
        for loc, mass in self.atoms:
            if loc == x:
                return mass
        return 0.0

    def override_for(self, point: float, side: str) -> Optional[str]:
        for ov in self.integrability_overrides:
            if ov.point == point and ov.side == side:
                return "finite" if ov.finite else "infinite"
        return None


@dataclass(frozen=True)
class DiffusionSpec:
    space: StateSpace
    scale: ScaleFunction
    speed: SpeedMeasure
    label: str = ""


@dataclass(frozen=True)
class BoundaryReport:
    boundary: Side
    u_value: float
    v_value: float
    kind: str
    accessible: bool
    behavior: str
    scale_limit: float


@dataclass(frozen=True)
class Violation:
    code: str
    where: str
    message: str


# ---------------------------------------------------------------------------
# Piecewise evaluation helpers
# ---------------------------------------------------------------------------

def _edges(breakpoints: tuple[float, ...], lo: float, hi: float) -> list[float]:
    return [lo, *breakpoints, hi]


def piece_vectorized(e: Expr) -> Callable[[np.ndarray], np.ndarray]:
    return lambda xs: eval_array(e, xs)


class _CumulativeMap:
    """Anchored cumulative integral of a piecewise density over the interior.

    Values at interior points are exact piece-by-piece quadratures cached at
    breakpoint edges; boundary values are improper limits (possibly +-inf).
    """

    def __init__(self, breakpoints, pieces, anchor: float, lo: float, hi: float,
                 override_lookup=None):
        self.edges = _edges(breakpoints, lo, hi)
        self.pieces = pieces
        self.anchor = anchor
        self.lo, self.hi = lo, hi
        self.override_lookup = override_lookup or (lambda point, side: None)
        self._edge_cum: dict[int, float] = {}
        self._anchor_piece = self._piece_index(anchor)
        self._limits: dict[str, float] = {}
        self._cache: dict[float, float] = {}
        self._piece_pts: dict[int, list[float]] = {}

    def _piece_index(self, x: float) -> int:
        # interior breakpoints belong to the piece on their right
        idx = 0
        for b in self.edges[1:-1]:
            if x >= b:
                idx += 1
        return idx

    def _piece_fun(self, i: int):
        return piece_vectorized(self.pieces[i])

    def _within_piece(self, i: int, a: float, b: float) -> float:
        """Integral of piece i over [a, b] (a <= b), both inside the piece.

        Runs tighter than the default tolerance: cumulative values feed outer
        quadratures whose own tolerance must dominate the inner noise.
        """
        if a == b:
            return 0.0
        # valid specs have no interior blow-ups, so an infinite result here is
        # double-precision overflow of a genuinely huge mass: saturate.
        # (validate_spec still flags invalid densities via the saturated value.)
        return improper_integral(self._piece_fun(i), a, b, rel_tol=1e-12).value

    def _cum_to_edge(self, j: int) -> float:
        """Signed integral from the anchor to interior edge index j."""
        if j in self._edge_cum:
            return self._edge_cum[j]
        total = 0.0
        if j > self._anchor_piece:
            lo = self.anchor
            for i in range(self._anchor_piece, j):
                hi = self.edges[i + 1]
                total += self._within_piece(i, lo, hi)
                lo = hi
        else:
            hi = self.anchor
            for i in range(self._anchor_piece, j - 1, -1):
                lo = self.edges[i]
                total -= self._within_piece(i, lo, hi)
                hi = lo
        self._edge_cum[j] = total
        return total

    def value(self, x: float) -> float:
        """Cumulative integral from the anchor to interior point x.

        Computed as an increment from the nearest already-known point of the
        same piece, so ladders of nearby queries (tail panels) stay cheap.
        """
        if not (self.lo < x < self.hi):
            raise ValueError(f"{x} is not interior to ({self.lo}, {self.hi})")
        if x in self._cache:
            return self._cache[x]
        i = self._piece_index(x)
        refs: list[tuple[float, float]] = []
        if i == self._anchor_piece:
            refs.append((self.anchor, 0.0))
        if i > 0:
            refs.append((self.edges[i], self._cum_to_edge(i)))
        if i < len(self.pieces) - 1:
            refs.append((self.edges[i + 1], self._cum_to_edge(i + 1)))
        pts = self._piece_pts.setdefault(i, [])
        if pts:
            j = bisect.bisect_left(pts, x)
            for k in (j - 1, j):
                if 0 <= k < len(pts):
                    refs.append((pts[k], self._cache[pts[k]]))
        finite_refs = [rv for rv in refs if math.isfinite(rv[1])]
        ref_x, ref_v = min(finite_refs or refs, key=lambda rv: abs(x - rv[0]))
        if math.isinf(ref_v):
            v = ref_v  # the whole region saturated past double precision
        elif x >= ref_x:
            v = ref_v + self._within_piece(i, ref_x, x)
        else:
            v = ref_v - self._within_piece(i, x, ref_x)
        self._cache[x] = v
        bisect.insort(pts, x)
        return v

    def limit(self, side: Side) -> float:
        """Cumulative limit toward the lo/hi boundary; +-inf when divergent."""
        if side in self._limits:
            return self._limits[side]
        if side == "r":
            i = len(self.pieces) - 1
            if i == self._anchor_piece:
                start, base = self.anchor, 0.0
            else:
                start, base = self.edges[i], self._cum_to_edge(i)
            b = self.edges[i + 1]
            kw = {"override_right": self.override_lookup(b, "left"), "tail_right": True}
            v = improper_integral(self._piece_fun(i), start, b, **kw)
            out = base + v.value if v.finite else math.inf
        else:
            if self._anchor_piece == 0:
                start, base = self.anchor, 0.0
            else:
                start, base = self.edges[1], self._cum_to_edge(1)
            b = self.edges[0]
            kw = {"override_left": self.override_lookup(b, "right"), "tail_left": True}
            v = improper_integral(self._piece_fun(0), b, start, **kw)
            out = base - v.value if v.finite else -math.inf
        self._limits[side] = out
        return out


class _BoundaryGapMap:
    """|f-integral between a boundary point and x|, computed without the
    catastrophic cancellation of subtracting two anchored cumulatives.

    The innermost values come from direct improper integration toward the
    boundary; nearby queries ride incrementally on cached ones, falling back
    to a direct computation whenever an increment would eat the digits.
    """

    def __init__(self, cum: _CumulativeMap, side: Side):
        self.cum = cum
        self.side = side
        self.b = cum.edges[0] if side == "l" else cum.edges[-1]
        self.piece = 0 if side == "l" else len(cum.pieces) - 1
        self.inner_edge: Optional[float] = None
        if len(cum.pieces) > 1:
            self.inner_edge = cum.edges[1] if side == "l" else cum.edges[-2]
        self.override = cum.override_lookup(self.b, "right" if side == "l" else "left")
        self._cache: dict[float, float] = {}
        self._err: dict[float, float] = {}
        self._pts: list[float] = []

    def _direct(self, x: float) -> float:
        # the probe decides whether the boundary end needs tail analysis; a
        # bounded density on an ulp-wide interval must go straight to panels
        if self.side == "l":
            v = improper_integral(self.cum._piece_fun(self.piece), self.b, x,
                                  override_left=self.override, rel_tol=1e-12)
        else:
            v = improper_integral(self.cum._piece_fun(self.piece), x, self.b,
                                  override_right=self.override, rel_tol=1e-12)
        return v.value if v.finite else math.inf

    def gap(self, x: float) -> float:
        if x in self._cache:
            return self._cache[x]
        e = self.inner_edge
        if e is not None and ((self.side == "l" and x > e) or (self.side == "r" and x < e)):
            # outside the boundary piece: boundary-piece gap plus an interior
            # increment, which cannot cancel against the near-boundary part
            base = self.gap(e)
            v = base + abs(self.cum.value(x) - self._edge_value())
            err = self._err[e] + 1e-12 * abs(v)
        else:
            v, err = self._incremental(x)
        self._cache[x] = v
        self._err[x] = err
        bisect.insort(self._pts, x)
        return v

    def _edge_value(self) -> float:
        return self.cum._cum_to_edge(1 if self.side == "l" else len(self.cum.pieces) - 1)

    def _incremental(self, x: float) -> tuple[float, float]:
        ref = None
        if self._pts:
            j = bisect.bisect_left(self._pts, x)
            cands = [self._pts[k] for k in (j - 1, j) if 0 <= k < len(self._pts)]
            in_piece = [c for c in cands
                        if self.inner_edge is None
                        or (self.side == "l" and c <= self.inner_edge)
                        or (self.side == "r" and c >= self.inner_edge)]
            if in_piece:
                ref = min(in_piece, key=lambda c: abs(c - x))
        if ref is None or math.isinf(self._cache[ref]):
            v = self._direct(x)
            return v, 1e-12 * abs(v)
        inc = self.cum._within_piece(self.piece, min(x, ref), max(x, ref))
        toward_b = (x < ref) if self.side == "l" else (x > ref)
        cand = self._cache[ref] - inc if toward_b else self._cache[ref] + inc
        err = self._err[ref] + 1e-12 * inc
        if cand <= 0.0 or err > 1e-9 * cand:
            v = self._direct(x)  # accumulated error would eat the digits
            return v, 1e-12 * abs(v)
        return cand, err


_MAPS_CACHE: dict[DiffusionSpec, tuple[_CumulativeMap, _CumulativeMap]] = {}
_GAP_CACHE: dict[tuple[DiffusionSpec, str, Side], _BoundaryGapMap] = {}


def boundary_scale_gap(spec: DiffusionSpec, boundary: Side) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized z -> |s(z) - s(b)| that stays accurate as z approaches b."""
    key = (spec, "scale", boundary)
    if key not in _GAP_CACHE:
        _GAP_CACHE[key] = _BoundaryGapMap(_maps(spec)[0], boundary)
    gm = _GAP_CACHE[key]
    return lambda z: np.array([gm.gap(float(t)) for t in z])


def boundary_speed_gap(spec: DiffusionSpec, boundary: Side) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized z -> density mass of the interval between b and z (no atoms)."""
    key = (spec, "speed", boundary)
    if key not in _GAP_CACHE:
        _GAP_CACHE[key] = _BoundaryGapMap(_maps(spec)[1], boundary)
    gm = _GAP_CACHE[key]
    return lambda z: np.array([gm.gap(float(t)) for t in z])


def _maps(spec: DiffusionSpec) -> tuple[_CumulativeMap, _CumulativeMap]:
    got = _MAPS_CACHE.get(spec)
    if got is None:
        sp = spec.space
        smap = _CumulativeMap(spec.scale.breakpoints, spec.scale.pieces,
                              spec.scale.anchor_point, sp.l, sp.r)
        mmap = _CumulativeMap(spec.speed.breakpoints, spec.speed.pieces,
                              spec.scale.anchor_point, sp.l, sp.r,
                              override_lookup=spec.speed.override_for)
        _MAPS_CACHE[spec] = (smap, mmap)
        got = (smap, mmap)
    return got


# ---------------------------------------------------------------------------
# Scale
# ---------------------------------------------------------------------------

def scale_at(spec: DiffusionSpec, x: float) -> float:
    """s(x), anchored; at a boundary point the (possibly infinite) limit."""
    smap, _ = _maps(spec)
    sp = spec.space
    if x == sp.l:
        lim = smap.limit("l")
        return spec.scale.anchor_value + lim if math.isfinite(lim) else -math.inf
    if x == sp.r:
        lim = smap.limit("r")
        return spec.scale.anchor_value + lim if math.isfinite(lim) else math.inf
    return spec.scale.anchor_value + smap.value(x)


def scale_density_at(spec: DiffusionSpec, x: float, side: str = "right") -> float:
    """s'(x) evaluated on the piece at x (breakpoints resolve by side)."""
    pieces, breaks = spec.scale.pieces, spec.scale.breakpoints
    i = sum(1 for b in breaks if (x >= b if side == "right" else x > b))
    v = eval_array(pieces[i], np.array([x]))[0]
    return float(v)


# ---------------------------------------------------------------------------
# Speed measure
# ---------------------------------------------------------------------------

def speed_of(spec: DiffusionSpec, a: float, b: float,
             include_a: bool = False, include_b: bool = True) -> IntegralVerdict:
    """m of an interval of cl(J): density quadrature plus atoms inside."""
    sp = spec.space
    if not (a <= b):
        raise ValueError("need a <= b")
    lo = max(a, sp.l)
    hi = min(b, sp.r)
    _, mmap = _maps(spec)

    atom_total = 0.0
    for loc, mass in spec.speed.atoms:
        if (lo < loc < hi) or (loc == lo and include_a and loc == a) \
                or (loc == hi and include_b and loc == b):
            atom_total += mass
    # boundary atoms sit outside the interior density but belong to cl(J)
    if sp.l_closed and a == sp.l and include_a:
        atom_total += spec.speed.atom_mass(sp.l)
    if sp.r_closed and b == sp.r and include_b:
        atom_total += spec.speed.atom_mass(sp.r)
    if math.isinf(atom_total):
        return IntegralVerdict(math.inf, False, "quadrature")

    if lo >= hi:
        return IntegralVerdict(atom_total, True, "quadrature")

    method = "quadrature"
    if lo == sp.l:
        low_part = mmap.limit("l")
        if math.isinf(low_part):
            ov = spec.speed.override_for(sp.l, "right")
            if ov == "finite":
                raise QuadratureFailure("override claims finite speed mass but the "
                                        f"tail at {sp.l} diverges")
            return IntegralVerdict(math.inf, False, "exponent-fit")
        lo_val = low_part
    else:
        lo_val = mmap.value(lo)
    if hi == sp.r:
        hi_part = mmap.limit("r")
        if math.isinf(hi_part):
            return IntegralVerdict(math.inf, False, "exponent-fit")
        hi_val = hi_part
    else:
        hi_val = mmap.value(hi)
    total = hi_val - lo_val + atom_total
    return IntegralVerdict(total, math.isfinite(total), method)


def _interior_atoms(spec: DiffusionSpec, a: float, b: float):
    return [(loc, mass) for loc, mass in spec.speed.atoms if a < loc < b]


# ---------------------------------------------------------------------------
# Green kernel and first-exit quantities
# ---------------------------------------------------------------------------

def green_kernel(spec: DiffusionSpec, a: float, b: float, x: float, y: float) -> float:
    """G_(a,b)(x, y) = 2 (s(x^y)-s(a)) (s(b)-s(xvy)) / (s(b)-s(a)); 0 outside."""
    if not (a < x < b) or not (a < y < b):
        return 0.0
    sa, sb = scale_at(spec, a), scale_at(spec, b)
    sx, sy = scale_at(spec, x), scale_at(spec, y)
    lo, hi = min(sx, sy), max(sx, sy)
    return 2.0 * (lo - sa) * (sb - hi) / (sb - sa)


def hitting_probability(spec: DiffusionSpec, a: float, x: float, b: float) -> float:
    """P_x(T_b < T_a) for a < x < b with [a, b] inside the state space."""
    if not (a < x < b):
        raise ValueError("need a < x < b")
    sa, sx, sb = scale_at(spec, a), scale_at(spec, x), scale_at(spec, b)
    return (sx - sa) / (sb - sa)


def exit_split(spec: DiffusionSpec, a: float, x: float, b: float) -> tuple[float, float]:
    """(P_x(T_a < T_b), P_x(T_b < T_a)) with the pair summing to one exactly."""
    up = hitting_probability(spec, a, x, b)
    return 1.0 - up, up


def expected_exit_time(spec: DiffusionSpec, a: float, x: float, b: float) -> IntegralVerdict:
    """E_x[T_a ^ T_b] as the speed integral of the interval Green kernel."""
    if not (a < x < b):
        raise ValueError("need a < x < b")
    sa, sb = scale_at(spec, a), scale_at(spec, b)
    sx = scale_at(spec, x)
    span = sb - sa

    smap, _ = _maps(spec)

    def scale_vals(ys: np.ndarray) -> np.ndarray:
        return np.array([scale_at(spec, float(y)) for y in ys])

    total = 0.0
    # kernel has a kink at x; integrate the two sides separately, split at
    # breakpoints so every quadrature panel sees a smooth integrand
    cuts = sorted({a, x, b, *[c for c in spec.speed.breakpoints if a < c < b]})
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi <= x:
            def integrand(ys, _lo=lo, _hi=hi):
                sy = scale_vals(ys)
                g = 2.0 * (sy - sa) * (sb - sx) / span
                return g * _density_vals(spec, ys)
        else:
            def integrand(ys, _lo=lo, _hi=hi):
                sy = scale_vals(ys)
                g = 2.0 * (sx - sa) * (sb - sy) / span
                return g * _density_vals(spec, ys)
        v = improper_integral(integrand, lo, hi,
                              tail_left=(lo == a and lo == spec.space.l) or None,
                              tail_right=(hi == b and hi == spec.space.r) or None)
        if not v.finite:
            return IntegralVerdict(math.inf, False, v.method)
        total += v.value
    for loc, mass in _interior_atoms(spec, a, b):
        total += green_kernel(spec, a, b, x, loc) * mass
    return IntegralVerdict(total, True, "quadrature")


def _density_vals(spec: DiffusionSpec, ys: np.ndarray) -> np.ndarray:
    """Speed density at interior points, resolved piecewise."""
    breaks = spec.speed.breakpoints
    pieces = spec.speed.pieces
    out = np.empty_like(ys, dtype=float)
    idx = np.searchsorted(np.array(breaks), ys, side="right") if breaks else \
        np.zeros(len(ys), dtype=int)
    for i in range(len(pieces)):
        mask = idx == i
        if np.any(mask):
            out[mask] = eval_array(pieces[i], ys[mask])
    return out


# ---------------------------------------------------------------------------
# u / v integrals and boundary classification
# ---------------------------------------------------------------------------

_UV_CACHE: dict[tuple[DiffusionSpec, Side], tuple[float, float]] = {}


def uv_values(spec: DiffusionSpec, boundary: Side) -> tuple[float, float]:
    """The iterated integrals u(b), v(b) toward the boundary (inf allowed).

    Both are computed from the scale anchor as reference point; a second
    reference point must agree on finiteness (their values legitimately
    differ, the classification does not).
    """
    key = (spec, boundary)
    if key in _UV_CACHE:
        return _UV_CACHE[key]
    c = spec.scale.anchor_point
    u1, v1 = _uv_from(spec, boundary, c)
    c2 = _second_reference(spec, c)
    u2, v2 = _uv_from(spec, boundary, c2)
    if (math.isinf(u1) != math.isinf(u2)) or (math.isinf(v1) != math.isinf(v2)):
        raise InternalInconsistency(
            f"u/v finiteness at {boundary} depends on the reference point: "
            f"u=({u1}, {u2}), v=({v1}, {v2})")
    _UV_CACHE[key] = (u1, v1)
    return u1, v1


def _second_reference(spec: DiffusionSpec, c: float) -> float:
    sp = spec.space
    lo = sp.l if math.isfinite(sp.l) else c - 1.0
    hi = sp.r if math.isfinite(sp.r) else c + 1.0
    probe = 0.5 * (c + hi) if (c - lo) > (hi - c) else 0.5 * (lo + c)
    if probe == c:
        probe = 0.5 * (c + hi)
    return probe


def _uv_from(spec: DiffusionSpec, boundary: Side, c: float) -> tuple[float, float]:
    sp = spec.space
    b = sp.l if boundary == "l" else sp.r
    smap, mmap = _maps(spec)
    sc = scale_at(spec, c)
    mc = mmap.value(c)

    # m((c, z]) or m((z, c]) with interior atoms folded in
    def m_between(z: np.ndarray) -> np.ndarray:
        out = np.abs(np.array([mmap.value(float(t)) - mc for t in z]))
        for loc, mass in spec.speed.atoms:
            if not sp.l < loc < sp.r:
                continue
            if boundary == "r" and loc > c:      # c < loc <= z
                out = out + np.where(z >= loc, mass, 0.0)
            elif boundary == "l" and loc <= c:   # z < loc <= c
                out = out + np.where(z < loc, mass, 0.0)
        return out

    def s_between(y: np.ndarray) -> np.ndarray:
        return np.abs(np.array([scale_at(spec, float(t)) - sc for t in y]))

    lo, hi = (c, b) if boundary == "r" else (b, c)
    sing_at_b = {"tail_right" if boundary == "r" else "tail_left": True}
    ov = spec.speed.override_for(b, "left" if boundary == "r" else "right")

    cuts = sorted({lo, hi,
                   *[t for t in spec.scale.breakpoints if lo < t < hi],
                   *[t for t in spec.speed.breakpoints if lo < t < hi],
                   *[t for t, _ in spec.speed.atoms if lo < t < hi]})

    def piecewise_improper(fn, extra_override=None) -> float:
        total = 0.0
        for seg_lo, seg_hi in zip(cuts[:-1], cuts[1:]):
            kw = {}
            if boundary == "r" and seg_hi == b:
                kw = dict(tail_right=True, override_right=extra_override)
            elif boundary == "l" and seg_lo == b:
                kw = dict(tail_left=True, override_left=extra_override)
            v = improper_integral(fn, seg_lo, seg_hi, **kw)
            if not v.finite:
                return math.inf
            total += v.value
        return total

    def u_integrand(z: np.ndarray) -> np.ndarray:
        return m_between(z) * _scale_density_vals(spec, z)

    def v_integrand(y: np.ndarray) -> np.ndarray:
        return s_between(y) * _density_vals(spec, y)

    u = piecewise_improper(u_integrand)
    v = piecewise_improper(v_integrand, extra_override=ov)
    # atoms between c and b contribute |s(atom) - s(c)| * mass to v
    for loc, mass in spec.speed.atoms:
        if (boundary == "r" and c < loc < b) or (boundary == "l" and b < loc < c):
            if math.isfinite(v):
                v += abs(scale_at(spec, loc) - sc) * mass
    return u, v


def _scale_density_vals(spec: DiffusionSpec, ys: np.ndarray) -> np.ndarray:
    breaks = spec.scale.breakpoints
    pieces = spec.scale.pieces
    out = np.empty_like(ys, dtype=float)
    idx = np.searchsorted(np.array(breaks), ys, side="right") if breaks else \
        np.zeros(len(ys), dtype=int)
    for i in range(len(pieces)):
        mask = idx == i
        if np.any(mask):
            out[mask] = eval_array(pieces[i], ys[mask])
    return out


def _kind_from_uv(u: float, v: float) -> str:
    if math.isfinite(u) and math.isfinite(v):
        return REGULAR
    if math.isfinite(u):
        return EXIT
    if math.isfinite(v):
        return ENTRANCE
    return NATURAL


def accessibility_check(spec: DiffusionSpec, boundary: Side) -> bool:
    """The |s(b)| < inf and int |s(z)-s(b)| m(dz) < inf characterization."""
    sp = spec.space
    b = sp.l if boundary == "l" else sp.r
    sb = scale_at(spec, b)
    if not math.isfinite(sb):
        return False
    c = spec.scale.anchor_point
    lo, hi = (c, b) if boundary == "r" else (b, c)
    ov = spec.speed.override_for(b, "left" if boundary == "r" else "right")
    gapf = boundary_scale_gap(spec, boundary)

    def integrand(z: np.ndarray) -> np.ndarray:
        return gapf(z) * _density_vals(spec, z)

    cuts = sorted({lo, hi, *[t for t in spec.speed.breakpoints if lo < t < hi],
                   *[t for t in spec.scale.breakpoints if lo < t < hi]})
    total = 0.0
    for seg_lo, seg_hi in zip(cuts[:-1], cuts[1:]):
        kw = {}
        if boundary == "r" and seg_hi == b:
            kw = dict(tail_right=True, override_right=ov)
        elif boundary == "l" and seg_lo == b:
            kw = dict(tail_left=True, override_left=ov)
        v = improper_integral(integrand, seg_lo, seg_hi, **kw)
        if not v.finite:
            return False
        total += v.value
    for loc, mass in spec.speed.atoms:
        if (boundary == "r" and c < loc < b) or (boundary == "l" and b < loc < c):
            total += float(gapf(np.array([loc]))[0]) * mass
            if math.isinf(total):
                return False
    return True


_CLASSIFY_CACHE: dict[tuple[DiffusionSpec, Side], BoundaryReport] = {}


def classify_boundary(spec: DiffusionSpec, boundary: Side) -> BoundaryReport:
    """Classify a boundary point and its behavior; cross-checks accessibility."""
    key = (spec, boundary)
    if key in _CLASSIFY_CACHE:
        return _CLASSIFY_CACHE[key]
    sp = spec.space
    b = sp.l if boundary == "l" else sp.r
    u, v = uv_values(spec, boundary)
    kind = _kind_from_uv(u, v)
    accessible = kind in (REGULAR, EXIT)
    if accessibility_check(spec, boundary) != accessible:
        raise InternalInconsistency(
            f"u/v table says {kind} at {boundary} but the scale-integral "
            f"accessibility criterion disagrees (u={u}, v={v})")
    if not accessible:
        behavior = NOT_APPLICABLE
    elif kind == EXIT:
        behavior = ABSORBING  # convention m({b}) = inf at exit boundaries
    else:
        mass = spec.speed.atom_mass(b)
        if math.isinf(mass):
            behavior = ABSORBING
        elif mass > 0:
            behavior = SLOW_REFLECT
        else:
            behavior = INSTANT_REFLECT
    rep = BoundaryReport(boundary=boundary, u_value=u, v_value=v, kind=kind,
                         accessible=accessible, behavior=behavior,
                         scale_limit=scale_at(spec, b))
    _CLASSIFY_CACHE[key] = rep
    return rep


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _piece_samples(lo: float, hi: float, n: int = 64) -> np.ndarray:
    """n probe points inside (lo, hi); infinite edges squeeze geometrically."""
    t = (np.arange(n) + 0.5) / n
    if math.isfinite(lo) and math.isfinite(hi):
        return lo + (hi - lo) * t
    if math.isfinite(lo):
        return lo + t / (1.0 - t)
    if math.isfinite(hi):
        return hi - (1.0 - t) / t
    return np.tan(math.pi * (t - 0.5))


def validate_spec(spec: DiffusionSpec) -> list[Violation]:
    """All invariant checks; an empty list means the spec is valid."""
    out: list[Violation] = []
    sp = spec.space

    def bad(code: str, where: str, msg: str):
        out.append(Violation(code, where, msg))

    if not (sp.l < spec.scale.anchor_point < sp.r):
        bad("AnchorOutsideInterior", "scale.anchor",
            f"anchor {spec.scale.anchor_point} not in ({sp.l}, {sp.r})")
        return out

    for name, breaks in (("scale", spec.scale.breakpoints),
                         ("speed", spec.speed.breakpoints)):
        for bkpt in breaks:
            if not (sp.l < bkpt < sp.r):
                bad("BreakpointOutsideInterior", name, f"breakpoint {bkpt}")

    # densities: s' > 0, speed density >= 0 and not identically 0 per piece
    for name, breaks, pieces, positive in (
            ("scale", spec.scale.breakpoints, spec.scale.pieces, True),
            ("speed", spec.speed.breakpoints, spec.speed.pieces, False)):
        edges = _edges(breaks, sp.l, sp.r)
        for i, piece in enumerate(pieces):
            xs = _piece_samples(edges[i], edges[i + 1])
            vals = eval_array(piece, xs)
            if np.any(np.isnan(vals)):
                bad("UndefinedDensity", f"{name}.pieces[{i}]",
                    f"undefined at e.g. x={xs[np.isnan(vals)][0]:.6g}")
                continue
            if positive and np.any(vals <= 0):
                bad("NonPositiveScaleDensity", f"scale.pieces[{i}]",
                    f"s' <= 0 at e.g. x={xs[vals <= 0][0]:.6g}")
            if not positive:
                if np.any(vals < 0):
                    bad("NegativeDensity", f"speed.pieces[{i}]",
                        f"density < 0 at e.g. x={xs[vals < 0][0]:.6g}")
                elif np.all(vals == 0):
                    bad("ZeroDensityPiece", f"speed.pieces[{i}]",
                        "speed density identically zero on a piece")

    for loc, mass in spec.speed.atoms:
        if mass <= 0:
            bad("NonPositiveAtom", f"atom@{loc}", "atom mass must be > 0")
        if sp.l < loc < sp.r:
            if math.isinf(mass):
                bad("InfiniteInteriorAtom", f"atom@{loc}",
                    "interior atoms must have finite mass (local finiteness)")
        elif loc == sp.l:
            if not sp.l_closed:
                bad("AtomAtOpenEndpoint", f"atom@{loc}", "left endpoint is open")
        elif loc == sp.r:
            if not sp.r_closed:
                bad("AtomAtOpenEndpoint", f"atom@{loc}", "right endpoint is open")
        else:
            bad("AtomOutsideClosure", f"atom@{loc}", "atom outside cl(J)")

    if out:
        return out  # classification below needs structurally sound densities

    # local finiteness of m and strict monotonicity of s across the interior
    try:
        probes = _piece_samples(sp.l, sp.r, 8)
        for lo, hi in zip(probes[:-1], probes[1:]):
            v = speed_of(spec, lo, hi)
            if not v.finite:
                bad("LocalFinitenessViolation", f"({lo:.6g},{hi:.6g})",
                    "speed measure infinite on a compact interior interval")
            scale_at(spec, hi)
    except (QuadratureFailure, InconclusiveTail) as exc:
        bad("InteriorIntegralFailure", "interior", str(exc))
        return out

    # boundary classification must match closedness and exit conventions
    for side, closed in (("l", sp.l_closed), ("r", sp.r_closed)):
        b = sp.l if side == "l" else sp.r
        try:
            rep = classify_boundary(spec, side)
        except InconclusiveTail as exc:
            bad("InconclusiveBoundary", side, str(exc))
            continue
        except InternalInconsistency as exc:
            bad("InternalInconsistency", side, str(exc))
            continue
        if rep.accessible != closed:
            bad("AccessibilityMismatch", side,
                f"{side} is {rep.kind} ({'accessible' if rep.accessible else 'inaccessible'}) "
                f"but the state space marks it {'closed' if closed else 'open'}")
        if rep.kind == EXIT and not math.isinf(spec.speed.atom_mass(b)):
            bad("ExitBoundaryNeedsInfiniteMass", side,
                "exit boundaries are absorbing: declare m({b}) = inf")
    return out


# ---------------------------------------------------------------------------
# Gauge
# ---------------------------------------------------------------------------

def affine_gauge(spec: DiffusionSpec, k: float, shift: float = 0.0) -> DiffusionSpec:
    """The same diffusion presented with scale k*s + shift and speed m/k."""
    if k <= 0:
        raise ValueError("gauge factor must be positive")
    scale = ScaleFunction(
        breakpoints=spec.scale.breakpoints,
        pieces=tuple(fold(Mul(Num(k), p)) for p in spec.scale.pieces),
        anchor_point=spec.scale.anchor_point,
        anchor_value=k * spec.scale.anchor_value + shift,
    )
    speed = SpeedMeasure(
        breakpoints=spec.speed.breakpoints,
        pieces=tuple(fold(Mul(Num(1.0 / k), p)) for p in spec.speed.pieces),
        atoms=tuple((loc, mass / k) for loc, mass in spec.speed.atoms),
        integrability_overrides=spec.speed.integrability_overrides,
    )
    return DiffusionSpec(space=spec.space, scale=scale, speed=speed,
                         label=spec.label + f" (gauge k={k:g})")
