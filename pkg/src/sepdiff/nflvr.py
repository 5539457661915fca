"""Deterministic no-free-lunch-with-vanishing-risk screening.

For a single-asset market whose discounted price is a regular diffusion on
[l, inf) or (l, inf), the existence of an equivalent local martingale
measure reduces to integral conditions on scale and speed near the lower
boundary: the scale density must be kink-free with beta = s''/s' locally
square-integrable, and then either the weighted beta integral at l converges
(the ELMM pair stays equivalent across visits to l) or the boundary is never
reached by either law.  The candidate ELMM is the natural-scale diffusion
whose speed measure is the original one reweighted by the scale density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .expr import Expr, Mul, Num, derivative, eval_array, fold, simplify_ratio
from .model import (
    DiffusionSpec, ScaleFunction, SpeedMeasure, StateSpace,
    boundary_scale_gap, classify_boundary, improper_integral, scale_at,
    scale_density_at,
)

__all__ = [
    "ConditionVerdict", "NflvrReport", "NotLowerBounded",
    "KinkInScale", "BetaNotLocallyL2", "LeftBoundaryNotAbsorbing",
    "beta_of_scale", "check_condition_b2", "check_condition_b3",
    "nflvr_verdict", "elmm_characteristics",
]


class NotLowerBounded(ValueError):
    pass


class KinkInScale(ValueError):
    def __init__(self, point: float):
        super().__init__(f"scale density has a kink at {point}")
        self.point = point


class BetaNotLocallyL2(ValueError):
    def __init__(self, point: float):
        super().__init__(f"beta^2 fails local integrability at {point}")
        self.point = point


class LeftBoundaryNotAbsorbing(ValueError):
    def __init__(self, point: float):
        super().__init__(f"accessible lower boundary {point} must carry infinite mass")
        self.point = point


@dataclass(frozen=True)
class ConditionVerdict:
    passed: bool
    detail: str
    value: Optional[float] = None


@dataclass(frozen=True)
class NflvrReport:
    cond_b1: ConditionVerdict
    cond_b2: Optional[ConditionVerdict]
    cond_b3: Optional[ConditionVerdict]
    s_infinity: float
    verdict_finite_horizon: bool
    verdict_infinite_horizon: bool
    elmm: Optional[DiffusionSpec]


def _require_lower_bounded(spec: DiffusionSpec) -> float:
    l, r = spec.space.l, spec.space.r
    if not math.isfinite(l) or r != math.inf:
        raise NotLowerBounded(f"state space must be [l, inf) or (l, inf), got ({l}, {r})")
    return l


def beta_of_scale(spec: DiffusionSpec) -> tuple[tuple[float, float, Expr], ...]:
    """Recover beta = s''/s' piecewise; validates the shape of the scale.

    Raises KinkInScale when the density jumps at a breakpoint, BetaNotLocallyL2
    when beta^2 is not locally integrable, and LeftBoundaryNotAbsorbing when an
    accessible lower boundary lacks infinite mass.
    """
    l = _require_lower_bounded(spec)
    if spec.space.l_closed and not math.isinf(spec.speed.atom_mass(l)):
        raise LeftBoundaryNotAbsorbing(l)

    breaks = spec.scale.breakpoints
    for c in breaks:
        left = float(eval_array(_piece(spec, c, "left"), np.array([c]))[0])
        right = float(eval_array(_piece(spec, c, "right"), np.array([c]))[0])
        if not (math.isfinite(left) and math.isfinite(right)) or \
                not math.isclose(left, right, rel_tol=1e-9, abs_tol=0.0):
            raise KinkInScale(c)

    edges = [l, *breaks, math.inf]
    out = []
    for i, piece in enumerate(spec.scale.pieces):
        beta = simplify_ratio(derivative(piece), piece)
        out.append((edges[i], edges[i + 1], beta))

    # local square-integrability at the interior joins
    for c in breaks:
        lo = max(l, c - _local_span(spec, c))
        hi = c + _local_span(spec, c)
        for seg_lo, seg_hi, beta in out:
            if seg_lo <= c <= seg_hi:
                a, b = max(lo, seg_lo), min(hi, seg_hi)
                if a >= b:
                    continue

                def f(z, e=beta):
                    with np.errstate(all="ignore"):
                        return eval_array(e, z) ** 2

                if not improper_integral(f, a, b).finite:
                    raise BetaNotLocallyL2(c)
    return tuple(out)


def _piece(spec: DiffusionSpec, x: float, side: str) -> Expr:
    breaks, pieces = spec.scale.breakpoints, spec.scale.pieces
    idx = sum(1 for b in breaks if (x >= b if side == "right" else x > b))
    return pieces[idx]


def _local_span(spec: DiffusionSpec, c: float) -> float:
    gaps = [abs(c - b) for b in spec.scale.breakpoints if b != c]
    gaps.append(1.0)
    return 0.5 * min(gaps)


def check_condition_b2(spec: DiffusionSpec,
                       betas: Optional[tuple] = None) -> ConditionVerdict:
    """Finiteness of the (x - l)-weighted beta-squared integral near l."""
    l = _require_lower_bounded(spec)
    betas = beta_of_scale(spec) if betas is None else betas
    total = 0.0
    for seg_lo, seg_hi, beta in betas:
        a, b = max(seg_lo, l), min(seg_hi, l + 1.0)
        if a >= b:
            continue

        def f(z, e=beta):
            with np.errstate(all="ignore"):
                return (z - l) * eval_array(e, z) ** 2

        v = improper_integral(f, a, b, tail_left=(a == l) or None)
        if not v.finite:
            return ConditionVerdict(False, "weighted beta integral diverges at l",
                                    value=math.inf)
        total += v.value
    return ConditionVerdict(True, "weighted beta integral converges", value=total)


def check_condition_b3(spec: DiffusionSpec,
                       betas: Optional[tuple] = None) -> ConditionVerdict:
    """The boundary-avoidance route: the scale pushes l out of reach for both
    the price law and the candidate ELMM."""
    l = _require_lower_bounded(spec)
    if betas is None:
        beta_of_scale(spec)

    s_l = scale_at(spec, l)
    if math.isinf(s_l):
        clause1 = True
        detail1 = "s(l) = -inf"
    else:
        gap = boundary_scale_gap(spec, "l")

        def f1(z):
            return gap(z) * _dens(spec, z)

        c = spec.scale.anchor_point
        v1 = improper_integral(f1, l, c, tail_left=True,
                               override_left=spec.speed.override_for(l, "right"))
        v1_val = v1.value + sum(float(gap(np.array([a]))[0]) * m
                                for a, m in spec.speed.atoms if l < a < c)
        clause1 = not (v1.finite and math.isfinite(v1_val))
        detail1 = f"s(l) finite, scale-gap speed integral {'diverges' if clause1 else 'converges'}"

    def f2(z):
        with np.errstate(all="ignore"):
            sprime = np.array([scale_density_at(spec, float(t)) for t in z])
            return (z - l) * sprime * _dens(spec, z)

    c = spec.scale.anchor_point
    v2 = improper_integral(f2, l, c, tail_left=True,
                           override_left=spec.speed.override_for(l, "right"))
    v2_total = v2.value
    if v2.finite:
        for a, m in spec.speed.atoms:
            if l < a < c:
                v2_total += (a - l) * scale_density_at(spec, a) * m
    clause2 = not (v2.finite and math.isfinite(v2_total))

    passed = clause1 and clause2
    return ConditionVerdict(
        passed,
        detail1 + ("; (x-l) s' speed integral diverges" if clause2
                   else "; (x-l) s' speed integral converges"),
        value=None)


def _dens(spec: DiffusionSpec, z: np.ndarray) -> np.ndarray:
    breaks, pieces = spec.speed.breakpoints, spec.speed.pieces
    out = np.empty_like(z, dtype=float)
    idx = np.searchsorted(np.array(breaks), z, side="right") if breaks else \
        np.zeros(len(z), dtype=int)
    for i in range(len(pieces)):
        mask = idx == i
        if np.any(mask):
            out[mask] = eval_array(pieces[i], z[mask])
    return out


def nflvr_verdict(spec: DiffusionSpec, horizon: str = "finite") -> NflvrReport:
    """Full screening report; `horizon` is only a presentation hint since both
    horizon verdicts share every sub-computation."""
    _require_lower_bounded(spec)
    if horizon not in ("finite", "infinite"):
        raise ValueError("horizon must be 'finite' or 'infinite'")
    try:
        betas = beta_of_scale(spec)
        b1 = ConditionVerdict(True, "scale density kink-free, beta locally L2, "
                                    "lower boundary absorbing when accessible")
    except (KinkInScale, BetaNotLocallyL2, LeftBoundaryNotAbsorbing) as exc:
        b1 = ConditionVerdict(False, str(exc))
        return NflvrReport(cond_b1=b1, cond_b2=None, cond_b3=None,
                           s_infinity=scale_at(spec, math.inf),
                           verdict_finite_horizon=False,
                           verdict_infinite_horizon=False, elmm=None)
    b2 = check_condition_b2(spec, betas)
    b3 = check_condition_b3(spec, betas)
    s_inf = scale_at(spec, math.inf)
    finite_ok = b2.passed or b3.passed
    infinite_ok = b2.passed and math.isinf(s_inf)
    elmm = elmm_characteristics(spec) if (finite_ok or infinite_ok) else None
    return NflvrReport(cond_b1=b1, cond_b2=b2, cond_b3=b3, s_infinity=s_inf,
                       verdict_finite_horizon=finite_ok,
                       verdict_infinite_horizon=infinite_ok, elmm=elmm)


def elmm_characteristics(spec: DiffusionSpec) -> DiffusionSpec:
    """The candidate ELMM: identity scale, speed density s'(x) m(dx)."""
    l = _require_lower_bounded(spec)
    merged = sorted(set(spec.scale.breakpoints) | set(spec.speed.breakpoints))
    pieces = []
    probe_edges = [l, *merged, math.inf]
    for i in range(len(probe_edges) - 1):
        lo, hi = probe_edges[i], probe_edges[i + 1]
        w = lo + (0.5 * (hi - lo) if math.isfinite(hi) else max(1.0, abs(lo)))
        sp = _piece(spec, w, "right")
        dp_idx = sum(1 for b in spec.speed.breakpoints if w >= b)
        dp = spec.speed.pieces[dp_idx]
        pieces.append(simplify_ratio(Mul(sp, dp)))
    atoms = []
    for loc, mass in spec.speed.atoms:
        if loc == l:
            atoms.append((loc, mass))  # infinite by beta_of_scale's precondition
        else:
            atoms.append((loc, mass * scale_density_at(spec, loc)))
    c = spec.scale.anchor_point
    return DiffusionSpec(
        space=spec.space,
        scale=ScaleFunction(breakpoints=(), pieces=(Num(1.0),),
                            anchor_point=c, anchor_value=c),
        speed=SpeedMeasure(breakpoints=tuple(merged), pieces=tuple(pieces),
                           atoms=tuple(atoms),
                           integrability_overrides=spec.speed.integrability_overrides),
        label=f"ELMM of {spec.label}" if spec.label else "ELMM",
    )
