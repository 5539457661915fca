"""Ready-made specs for classic one-dimensional diffusions.

These cover the standard zoo: Brownian motion with or without drift, sticky
and skew Brownian motions, squared Bessel processes with configurable origin
behavior, geometric-Brownian-type processes, and drifted Brownian motion
reflected on a compact interval.
"""

from __future__ import annotations

import math

from .expr import parse_expression
from .model import DiffusionSpec, Override, ScaleFunction, SpeedMeasure, StateSpace

INF = math.inf


def _pieces(*sources: str):
    return tuple(parse_expression(s) for s in sources)


def make_spec(l: float, r: float, l_closed: bool, r_closed: bool,
              scale_pieces, speed_pieces, breakpoints=(), speed_breakpoints=None,
              anchor=(0.0, 0.0), atoms=(), overrides=(), label="") -> DiffusionSpec:
    """Assemble a spec from density source strings."""
    if isinstance(scale_pieces, str):
        scale_pieces = (scale_pieces,)
    if isinstance(speed_pieces, str):
        speed_pieces = (speed_pieces,)
    speed_breaks = tuple(breakpoints if speed_breakpoints is None else speed_breakpoints)
    return DiffusionSpec(
        space=StateSpace(l, r, l_closed, r_closed),
        scale=ScaleFunction(breakpoints=tuple(breakpoints),
                            pieces=_pieces(*scale_pieces),
                            anchor_point=anchor[0], anchor_value=anchor[1]),
        speed=SpeedMeasure(breakpoints=speed_breaks,
                           pieces=_pieces(*speed_pieces),
                           atoms=tuple(atoms),
                           integrability_overrides=tuple(overrides)),
        label=label,
    )


def brownian_motion() -> DiffusionSpec:
    return make_spec(-INF, INF, False, False, "1", "1", label="Brownian motion")


def sticky_brownian(gamma: float) -> DiffusionSpec:
    """Brownian motion sticky at the origin: m = dx + gamma*delta_0."""
    return make_spec(-INF, INF, False, False, "1", "1",
                     atoms=((0.0, gamma),),
                     label=f"sticky Brownian motion (gamma={gamma:g})")


def skew_brownian(alpha: float) -> DiffusionSpec:
    """Skew Brownian motion with upward probability alpha at the origin."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return make_spec(
        -INF, INF, False, False,
        scale_pieces=(f"1/{alpha!r}", f"1/{1 - alpha!r}"),
        speed_pieces=(f"{alpha!r}", f"{1 - alpha!r}"),
        breakpoints=(0.0,),
        label=f"skew Brownian motion (alpha={alpha:g})")


def squared_bessel(gamma: float, origin_mass: float = 0.0) -> DiffusionSpec:
    """Generalized squared Bessel process of dimension gamma > 0.

    For gamma < 2 the origin is regular and origin_mass picks the behavior
    there (0 = instantaneous reflection, inf = absorption); for gamma >= 2
    the origin is inaccessible and origin_mass is ignored.
    """
    if gamma <= 0:
        raise ValueError("dimension must be positive")
    nu = gamma / 2.0 - 1.0
    if nu == 0.0:
        scale_src = "2/x"
        speed_src = "x/2"
    else:
        # s(x) = -sgn(nu) x^(-2 nu)  =>  s'(x) = 2|nu| x^(-2 nu - 1)
        scale_src = f"{2 * abs(nu)!r}*x^({-2 * nu - 1!r})"
        speed_src = f"x^({2 * nu + 1!r})/{2 * abs(nu)!r}"
    accessible = gamma < 2
    atoms = ((0.0, origin_mass),) if accessible and origin_mass > 0 else ()
    anchor_value = {True: 1.0 if nu < 0 else -1.0, False: 0.0}[nu != 0.0]
    return make_spec(0.0, INF, accessible, False, scale_src, speed_src,
                     anchor=(1.0, anchor_value if nu != 0 else 0.0),
                     atoms=atoms,
                     label=f"squared Bessel (gamma={gamma:g}, m0={origin_mass:g})")


def geometric_like(mu: float = 1.0, sigma: float = 1.0) -> DiffusionSpec:
    """Geometric-Brownian-type diffusion dX = mu X dt + sigma X dW on (0, inf)."""
    q = 2.0 * mu / sigma ** 2
    scale_src = f"x^({-q!r})"
    speed_src = f"x^({q - 2!r})/{sigma ** 2!r}"
    return make_spec(0.0, INF, False, False, scale_src, speed_src,
                     anchor=(1.0, 0.0),
                     label=f"geometric Brownian motion (mu={mu:g}, sigma={sigma:g})")


def drifted_brownian_absorbed(mu: float) -> DiffusionSpec:
    """Brownian motion with drift mu on [0, inf), absorbed at the origin."""
    return make_spec(0.0, INF, True, False,
                     f"exp({-2 * mu!r}*x)", f"exp({2 * mu!r}*x)",
                     anchor=(1.0, (1.0 - math.exp(-2 * mu)) / (2 * mu) if mu else 1.0),
                     atoms=((0.0, INF),),
                     label=f"drifted BM absorbed at 0 (mu={mu:g})")


def brownian_absorbed() -> DiffusionSpec:
    """Driftless Brownian motion on [0, inf), absorbed at the origin."""
    return make_spec(0.0, INF, True, False, "1", "1",
                     anchor=(1.0, 1.0), atoms=((0.0, INF),),
                     label="BM absorbed at 0")


def brownian_halfline(origin_mass: float = 0.0) -> DiffusionSpec:
    """Driftless Brownian motion on [0, inf) with chosen origin behavior."""
    atoms = ((0.0, origin_mass),) if origin_mass > 0 else ()
    return make_spec(0.0, INF, True, False, "1", "1",
                     anchor=(1.0, 1.0), atoms=atoms,
                     label=f"BM on half-line (m0={origin_mass:g})")


def sqrt_pushed_brownian(origin_mass: float = 0.0) -> DiffusionSpec:
    """Diffusion with drift 1/(2 sqrt(x)) away from the origin on [0, inf).

    Scale density exp(-2 sqrt(x)), speed density exp(2 sqrt(x)); the origin
    is regular and infinity inaccessible with a finite scale limit.
    """
    atoms = ((0.0, origin_mass),) if origin_mass > 0 else ()
    return make_spec(0.0, INF, True, False,
                     "exp(-2*sqrt(x))", "exp(2*sqrt(x))",
                     anchor=(1.0, 0.0), atoms=atoms,
                     label=f"sqrt-drift diffusion (m0={origin_mass:g})")


def reflected_drift_brownian(mu: float) -> DiffusionSpec:
    """BM with constant drift mu on [0, 1], instantaneously reflected at both ends."""
    if mu == 0.0:
        return make_spec(0.0, 1.0, True, True, "1", "1",
                         anchor=(0.5, 0.5), label="reflected BM on [0,1]")
    return make_spec(0.0, 1.0, True, True,
                     f"exp({-2 * mu!r}*x)", f"exp({2 * mu!r}*x)",
                     anchor=(0.5, -math.exp(-2 * mu * 0.5) / (2 * mu)),
                     label=f"reflected drifted BM on [0,1] (mu={mu:g})")
