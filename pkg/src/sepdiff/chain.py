"""Birth-death chain approximation of a diffusion on a finite grid.

Up-probabilities come from scale increments, so embedded hitting
probabilities are exact at grid resolution; holding-time means are the
speed integrals of the local two-cell Green kernel, so first-exit
expectations solve the same linear recursion as the diffusion's and match
it exactly.  Reflecting closed boundaries get the symmetrized-kernel
holding mean 2 * int_[b,c) (s(c)-s(y)) m(dy).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .expr import eval_array
from .kernels import MODE_ABSORB, MODE_REFLECT
from .model import (
    ABSORBING, DiffusionSpec, QuadratureFailure, classify_boundary,
    improper_integral, scale_at,
)
from .quadrature import _gk15  # single-panel rule for smooth interior cells

__all__ = [
    "GridChain", "UnboundedDomainWithoutTruncation", "build_chain",
    "chain_exit_time", "chain_hit_probability", "chain_hit_solve",
]


class UnboundedDomainWithoutTruncation(ValueError):
    """Inaccessible endpoints need an explicit truncation level."""


@dataclass(frozen=True)
class GridChain:
    grid: np.ndarray          # sorted grid points
    scale: np.ndarray         # s(grid)
    p_up: np.ndarray          # upward probability per grid point (interior)
    hold: np.ndarray          # mean holding time per grid point
    atom_share: np.ndarray    # fraction of the holding mean owed to an atom
    mass: np.ndarray          # chain speed mass per grid point
    left_mode: int            # MODE_ABSORB or MODE_REFLECT
    right_mode: int
    truncated_left: bool
    truncated_right: bool
    label: str = ""

    @property
    def n(self) -> int:
        return len(self.grid)

    def index_of(self, x: float) -> int:
        i = int(np.argmin(np.abs(self.grid - x)))
        if not math.isclose(self.grid[i], x, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError(f"{x} is not on the grid (nearest: {self.grid[i]})")
        return i

    def recurrent(self) -> bool:
        return self.left_mode == MODE_REFLECT and self.right_mode == MODE_REFLECT


def _dens_vals(spec: DiffusionSpec, ys: np.ndarray) -> np.ndarray:
    breaks, pieces = spec.speed.breakpoints, spec.speed.pieces
    out = np.empty_like(ys, dtype=float)
    idx = np.searchsorted(np.array(breaks), ys, side="right") if breaks else \
        np.zeros(len(ys), dtype=int)
    for i in range(len(pieces)):
        mask = idx == i
        if np.any(mask):
            out[mask] = eval_array(pieces[i], ys[mask])
    return out


def build_chain(spec: DiffusionSpec, n_cells: int,
                refinement: str = "uniform-x",
                truncate: Optional[tuple[Optional[float], Optional[float]]] = None,
                truncation_mode: str = "absorb",
                include_points: tuple[float, ...] = ()) -> GridChain:
    """Grid and transition data for the birth-death approximation.

    Inaccessible endpoints require a truncation level on that side; the chain
    then either absorbs there (default, estimates are leakage-flagged) or
    reflects when truncation_mode = "reflect" (appropriate on recurrent sides).
    """
    if n_cells < 4:
        raise ValueError("need at least 4 cells")
    if refinement not in ("uniform-x", "uniform-scale"):
        raise ValueError(f"unknown refinement {refinement!r}")
    if truncation_mode not in ("absorb", "reflect"):
        raise ValueError(f"unknown truncation mode {truncation_mode!r}")
    sp = spec.space
    trunc_lo, trunc_hi = truncate if truncate is not None else (None, None)

    rep_l, rep_r = classify_boundary(spec, "l"), classify_boundary(spec, "r")
    if rep_l.accessible and trunc_lo is None:
        lo, truncated_left = sp.l, False
        left_mode = MODE_ABSORB if rep_l.behavior == ABSORBING else MODE_REFLECT
    else:
        if trunc_lo is None:
            raise UnboundedDomainWithoutTruncation(
                f"left endpoint {sp.l} is inaccessible; pass a truncation level")
        if not sp.l < trunc_lo < sp.r:
            raise ValueError("left truncation level must be interior")
        lo, truncated_left = trunc_lo, True
        left_mode = MODE_ABSORB if truncation_mode == "absorb" else MODE_REFLECT
    if rep_r.accessible and trunc_hi is None:
        hi, truncated_right = sp.r, False
        right_mode = MODE_ABSORB if rep_r.behavior == ABSORBING else MODE_REFLECT
    else:
        if trunc_hi is None:
            raise UnboundedDomainWithoutTruncation(
                f"right endpoint {sp.r} is inaccessible; pass a truncation level")
        if not sp.l < trunc_hi < sp.r:
            raise ValueError("right truncation level must be interior")
        hi, truncated_right = trunc_hi, True
        right_mode = MODE_ABSORB if truncation_mode == "absorb" else MODE_REFLECT
    if not lo < hi:
        raise ValueError("empty grid span")

    if refinement == "uniform-x":
        grid = np.linspace(lo, hi, n_cells + 1)
    else:
        dense = np.linspace(lo, hi, 8 * n_cells + 1)
        s_dense = np.array([scale_at(spec, float(t)) for t in dense])
        targets = np.linspace(s_dense[0], s_dense[-1], n_cells + 1)
        grid = np.interp(targets, s_dense, dense)
        grid[0], grid[-1] = lo, hi

    # snap breakpoints, atoms, and requested points onto the grid
    specials = sorted({*include_points,
                       *[b for b in spec.scale.breakpoints if lo < b < hi],
                       *[b for b in spec.speed.breakpoints if lo < b < hi],
                       *[a for a, _ in spec.speed.atoms if lo < a < hi]})
    for pt in specials:
        j = int(np.argmin(np.abs(grid - pt)))
        j = min(max(j, 1), len(grid) - 2)
        grid[j] = pt
    grid = np.unique(grid)
    n = len(grid)
    if n < 5:
        raise ValueError("grid collapsed after snapping; increase n_cells")

    s_grid = np.array([scale_at(spec, float(t)) for t in grid])
    if np.any(np.diff(s_grid) <= 0):
        raise QuadratureFailure("scale values are not strictly increasing on the grid")

    p_up = np.zeros(n)
    p_up[1:-1] = (s_grid[1:-1] - s_grid[:-2]) / (s_grid[2:] - s_grid[:-2])

    hold = np.zeros(n)
    atom_share = np.zeros(n)
    mass = np.full(n, math.inf)
    for i in range(1, n - 1):
        sl, si, sr = s_grid[i - 1], s_grid[i], s_grid[i + 1]
        span = sr - sl
        g_ii = 2.0 * (si - sl) * (sr - si) / span

        def g_left(y):  # y in (grid[i-1], grid[i])
            sy = np.array([scale_at(spec, float(t)) for t in y])
            return 2.0 * (sy - sl) * (sr - si) / span * _dens_vals(spec, y)

        def g_right(y):
            sy = np.array([scale_at(spec, float(t)) for t in y])
            return 2.0 * (si - sl) * (sr - sy) / span * _dens_vals(spec, y)

        # boundary-adjacent half-cells may carry an integrable density blow-up;
        # interior half-cells are smooth and a single 15-point panel is exact
        if i == 1:
            v = improper_integral(g_left, grid[0], grid[1])
            if not v.finite:
                raise QuadratureFailure("speed mass of the first cell diverges")
            h_l = v.value
        else:
            h_l = _gk15(g_left, grid[i - 1], grid[i])[0]
        if i == n - 2:
            v = improper_integral(g_right, grid[i], grid[i + 1])
            if not v.finite:
                raise QuadratureFailure("speed mass of the last cell diverges")
            h_r = v.value
        else:
            h_r = _gk15(g_right, grid[i], grid[i + 1])[0]
        atom_t = g_ii * spec.speed.atom_mass(grid[i])
        hold[i] = h_l + h_r + atom_t
        if hold[i] > 0:
            atom_share[i] = atom_t / hold[i]
        mass[i] = hold[i] / g_ii

    for end, mode, j, nb in (("l", left_mode, 0, 1), ("r", right_mode, n - 1, n - 2)):
        if mode != MODE_REFLECT:
            continue  # absorbing ends keep hold = 0, mass = inf
        b_val, c_val = grid[j], grid[nb]
        sb, sc = s_grid[j], s_grid[nb]

        def g_refl(y):
            sy = np.array([scale_at(spec, float(t)) for t in y])
            return 2.0 * np.abs(sc - sy) * _dens_vals(spec, y)

        v = improper_integral(g_refl, min(b_val, c_val), max(b_val, c_val))
        if not v.finite:
            raise QuadratureFailure("reflecting-cell speed mass diverges")
        atom_b = 0.0
        if (end == "l" and not truncated_left) or (end == "r" and not truncated_right):
            atom_b = spec.speed.atom_mass(b_val)
        g_bb = 2.0 * abs(sc - sb)
        hold[j] = v.value + g_bb * atom_b
        if hold[j] > 0:
            atom_share[j] = g_bb * atom_b / hold[j]
        mass[j] = hold[j] / g_bb

    return GridChain(grid=grid, scale=s_grid, p_up=p_up, hold=hold,
                     atom_share=atom_share, mass=mass,
                     left_mode=left_mode, right_mode=right_mode,
                     truncated_left=truncated_left, truncated_right=truncated_right,
                     label=spec.label)


def _thomas(sub: np.ndarray, diag: np.ndarray, sup: np.ndarray,
            rhs: np.ndarray) -> np.ndarray:
    """Tridiagonal solve; sub[0] and sup[-1] are ignored."""
    m = len(diag)
    c = np.zeros(m)
    d = np.zeros(m)
    c[0] = sup[0] / diag[0]
    d[0] = rhs[0] / diag[0]
    for i in range(1, m):
        denom = diag[i] - sub[i] * c[i - 1]
        c[i] = sup[i] / denom if i < m - 1 else 0.0
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom
    out = np.zeros(m)
    out[-1] = d[-1]
    for i in range(m - 2, -1, -1):
        out[i] = d[i] - c[i] * out[i + 1]
    return out


def chain_exit_time(chain: GridChain, a_idx: int, x_idx: int, b_idx: int) -> float:
    """Exact expected exit time of the chain from (grid[a], grid[b])."""
    if not (0 <= a_idx < x_idx < b_idx < chain.n):
        raise ValueError("need a_idx < x_idx < b_idx on the grid")
    interior = np.arange(a_idx + 1, b_idx)
    p = chain.p_up[interior]
    sub = -(1.0 - p)
    sup = -p
    diag = np.ones(len(interior))
    rhs = chain.hold[interior].copy()
    sol = _thomas(sub, diag, sup, rhs)
    return float(sol[x_idx - (a_idx + 1)])


def chain_hit_solve(chain: GridChain, a_idx: int, x_idx: int, b_idx: int) -> float:
    """P(hit grid[b] before grid[a]) by solving the chain's harmonic equation."""
    if not (0 <= a_idx < x_idx < b_idx < chain.n):
        raise ValueError("need a_idx < x_idx < b_idx on the grid")
    interior = np.arange(a_idx + 1, b_idx)
    p = chain.p_up[interior]
    sub = -(1.0 - p)
    sup = -p
    diag = np.ones(len(interior))
    rhs = np.zeros(len(interior))
    rhs[-1] = p[-1]  # boundary value 1 at b
    sol = _thomas(sub, diag, sup, rhs)
    return float(sol[x_idx - (a_idx + 1)])


def chain_hit_probability(chain: GridChain, a_idx: int, x_idx: int, b_idx: int) -> float:
    """Hitting probability from the scale values (telescoped closed form)."""
    sa, sx, sb = (chain.scale[j] for j in (a_idx, x_idx, b_idx))
    return (sx - sa) / (sb - sa)
