"""Monte Carlo estimation on the birth-death chain and the validation suite
that cross-checks the sampler against the analytic layer."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import kernels
from .chain import GridChain, build_chain, chain_hit_probability
from .expr import eval_array
from .kernels import MODE_ABSORB, MODE_REFLECT, OUT_LOWER, OUT_TRUNCATED, OUT_UPPER
from .model import (
    DiffusionSpec, expected_exit_time, green_kernel, hitting_probability,
    improper_integral, speed_of,
)

__all__ = [
    "HitBefore", "ExitTime", "OccupationTime", "ErgodicAverage",
    "MonteCarloEstimate", "PathSample", "NotRecurrent",
    "estimate", "sample_path", "ergodic_oracle",
    "ValidationCheck", "ValidationConfig", "ValidationReport",
    "validate_against_analytic",
]


class NotRecurrent(RuntimeError):
    pass


@dataclass(frozen=True)
class HitBefore:
    """P(hit grid[upper] before grid[lower]) from the start index."""
    lower: int
    upper: int

    def describe(self, chain: GridChain) -> str:
        return f"hit {chain.grid[self.upper]:g} before {chain.grid[self.lower]:g}"


@dataclass(frozen=True)
class ExitTime:
    lower: int
    upper: int

    def describe(self, chain: GridChain) -> str:
        return f"exit time of ({chain.grid[self.lower]:g}, {chain.grid[self.upper]:g})"


@dataclass(frozen=True)
class OccupationTime:
    """Weighted occupation before the first hit of lower/upper; weights of one
    measure plain cell time, atom shares measure sticky time."""
    lower: int
    upper: int
    weights: tuple[float, ...]

    def describe(self, chain: GridChain) -> str:
        nz = [i for i, w in enumerate(self.weights) if w > 0]
        span = f"{chain.grid[nz[0]]:g}..{chain.grid[nz[-1]]:g}" if nz else "nothing"
        return f"occupation of {span} before exit"


@dataclass(frozen=True)
class ErgodicAverage:
    values: tuple[float, ...]  # f evaluated on the grid
    horizon: float

    def describe(self, chain: GridChain) -> str:
        return f"time average over horizon {self.horizon:g}"


Statistic = Union[HitBefore, ExitTime, OccupationTime, ErgodicAverage]


@dataclass(frozen=True)
class MonteCarloEstimate:
    value: float
    std_error: float
    n_paths: int
    target: str
    truncation_loss: float = 0.0  # fraction of paths stopped by truncation


def _mean_se(samples: np.ndarray) -> tuple[float, float]:
    n = len(samples)
    mean = float(np.mean(samples))
    if n < 2:
        return mean, math.inf
    sd = float(np.std(samples, ddof=1))
    return mean, sd / math.sqrt(n)


def estimate(chain: GridChain, start_idx: int, statistic: Statistic,
             n_paths: int, seed: int) -> MonteCarloEstimate:
    """Mean and standard error of the statistic over n_paths sampled paths."""
    if not 0 <= start_idx < chain.n:
        raise ValueError("start index off the grid")
    if isinstance(statistic, HitBefore):
        out = kernels.hit_paths(chain.p_up, start_idx, statistic.lower,
                                statistic.upper, chain.left_mode,
                                chain.right_mode, n_paths, seed)
        hits = (out == OUT_UPPER).astype(float)
        value, se = _mean_se(hits)
        loss = float(np.mean(out == OUT_TRUNCATED))
        return MonteCarloEstimate(value, se, n_paths, statistic.describe(chain), loss)
    if isinstance(statistic, (ExitTime, OccupationTime)):
        if isinstance(statistic, ExitTime):
            weights = np.ones(chain.n)
        else:
            weights = np.asarray(statistic.weights, dtype=float)
            if len(weights) != chain.n:
                raise ValueError("weights must match the grid")
        out, acc = kernels.timed_paths(chain.p_up, chain.hold, weights,
                                       start_idx, statistic.lower,
                                       statistic.upper, chain.left_mode,
                                       chain.right_mode, n_paths, seed)
        value, se = _mean_se(acc)
        loss = float(np.mean(out == OUT_TRUNCATED))
        return MonteCarloEstimate(value, se, n_paths, statistic.describe(chain), loss)
    if isinstance(statistic, ErgodicAverage):
        if not chain.recurrent():
            raise NotRecurrent("time averages need a chain reflecting at both ends")
        f_vals = np.asarray(statistic.values, dtype=float)
        if len(f_vals) != chain.n:
            raise ValueError("values must match the grid")
        avg = kernels.ergodic_paths(chain.p_up, chain.hold, f_vals, start_idx,
                                    statistic.horizon, chain.left_mode,
                                    chain.right_mode, n_paths, seed)
        value, se = _mean_se(avg)
        return MonteCarloEstimate(value, se, n_paths, statistic.describe(chain))
    raise TypeError(f"unknown statistic {statistic!r}")


# ---------------------------------------------------------------------------
# single-path realization (dump format and reference semantics)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathSample:
    seed: int
    path_index: int
    states: tuple[float, ...]
    durations: tuple[float, ...]
    termination: str  # horizon | absorbed | target-hit


def sample_path(chain: GridChain, start_idx: int,
                stop: Union[float, tuple[int, ...]],
                seed: int, path_index: int = 0,
                max_events: int = 10_000_000) -> PathSample:
    """One continuous-time path: exponential holds, then a scale-driven step.

    `stop` is either a time horizon (float) or a tuple of target grid indices.
    Uses the same per-path random stream as the batched kernels.
    """
    targets = stop if isinstance(stop, tuple) else ()
    horizon = stop if isinstance(stop, float) else math.inf
    state0 = int(kernels.stream_state(seed, path_index + 1)[path_index])
    golden = 0x9E3779B97F4A7C15
    mask = 0xFFFFFFFFFFFFFFFF
    k = 0

    def uniform() -> float:
        nonlocal k
        k += 1
        bits = int(kernels.mix64_array(
            np.array([(state0 + golden * k) & mask], dtype=np.uint64))[0])
        return ((bits >> 11) + 0.5) * 0.5 ** 53

    states: list[float] = []
    durations: list[float] = []
    i = start_idx
    t = 0.0
    termination = "horizon"
    for _ in range(max_events):
        if i in targets:
            termination = "target-hit"
            break
        at_left, at_right = i == 0, i == chain.n - 1
        if (at_left and chain.left_mode == MODE_ABSORB) or \
                (at_right and chain.right_mode == MODE_ABSORB):
            termination = "absorbed"
            break
        dt = -chain.hold[i] * math.log(uniform())
        if t + dt >= horizon:
            states.append(float(chain.grid[i]))
            durations.append(horizon - t)
            termination = "horizon"
            break
        states.append(float(chain.grid[i]))
        durations.append(dt)
        t += dt
        if at_left:
            i = 1
        elif at_right:
            i = chain.n - 2
        else:
            i = i + 1 if uniform() < chain.p_up[i] else i - 1
    return PathSample(seed=seed, path_index=path_index, states=tuple(states),
                      durations=tuple(durations), termination=termination)


# ---------------------------------------------------------------------------
# validation against the analytic layer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidationCheck:
    name: str
    estimate: float
    std_error: float
    oracle: float
    z: float

    @property
    def passed(self) -> bool:
        return abs(self.z) <= 4.0


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[ValidationCheck, ...]
    n_paths: int
    seed: int
    backend: str

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _occupation_oracle(spec: DiffusionSpec, a: float, x: float, b: float,
                       lo: float, hi: float) -> float:
    """E_x[time in (lo, hi) before exiting (a, b)] by Green-kernel quadrature."""
    cuts = sorted({lo, hi, *[t for t in (x, *spec.speed.breakpoints) if lo < t < hi]})
    total = 0.0
    for seg_lo, seg_hi in zip(cuts[:-1], cuts[1:]):
        def f(ys):
            from .model import _density_vals
            return np.array([green_kernel(spec, a, b, x, float(y)) for y in ys]) \
                * _density_vals(spec, ys)
        total += improper_integral(f, seg_lo, seg_hi).value
    for loc, massv in spec.speed.atoms:
        if lo < loc < hi:
            total += green_kernel(spec, a, b, x, loc) * massv
    return total


def ergodic_oracle(spec: DiffusionSpec, f: Callable[[np.ndarray], np.ndarray]) -> float:
    """Speed-measure average of f over the state space (ratio ergodic limit)."""
    sp = spec.space
    from .model import _density_vals

    def num(ys):
        return f(ys) * _density_vals(spec, ys)

    numerator = improper_integral(num, sp.l, sp.r).value
    mass = speed_of(spec, sp.l, sp.r, include_a=sp.l_closed, include_b=sp.r_closed)
    for loc, massv in spec.speed.atoms:
        if sp.l < loc < sp.r or (loc == sp.l and sp.l_closed) or (loc == sp.r and sp.r_closed):
            numerator += float(f(np.array([loc]))[0]) * massv
    if not mass.finite:
        raise NotRecurrent("speed measure has infinite total mass")
    return numerator / mass.value


@dataclass(frozen=True)
class ValidationConfig:
    n_cells: int = 200
    n_paths: int = 20_000
    seed: int = 7
    truncate: Optional[tuple[Optional[float], Optional[float]]] = None
    truncation_mode: str = "absorb"
    ergodic_horizon: float = 200.0
    ergodic_paths: int = 200
    p_up_bias: float = 0.0  # negative control: corrupt upward probabilities


def validate_against_analytic(spec: DiffusionSpec,
                              config: ValidationConfig = ValidationConfig()) -> ValidationReport:
    """Run the estimate families against analytic oracles and report z-scores.

    Checks run between the scale quartile points of the grid so every spec
    exercises the same machinery; the sticky-time check joins in when the
    spec carries an interior atom, the ergodic check when the chain reflects
    at both ends.
    """
    chain = build_chain(spec, config.n_cells, truncate=config.truncate,
                        truncation_mode=config.truncation_mode)
    if config.p_up_bias:
        biased = np.clip(chain.p_up + config.p_up_bias, 0.01, 0.99)
        biased[0] = chain.p_up[0]
        biased[-1] = chain.p_up[-1]
        chain = GridChain(grid=chain.grid, scale=chain.scale, p_up=biased,
                          hold=chain.hold, atom_share=chain.atom_share,
                          mass=chain.mass, left_mode=chain.left_mode,
                          right_mode=chain.right_mode,
                          truncated_left=chain.truncated_left,
                          truncated_right=chain.truncated_right,
                          label=chain.label + " (corrupted)")

    n = chain.n
    a_idx, x_idx, b_idx = n // 8, n // 2, n - 1 - n // 8
    a, x, b = (float(chain.grid[j]) for j in (a_idx, x_idx, b_idx))
    checks: list[ValidationCheck] = []

    est = estimate(chain, x_idx, HitBefore(a_idx, b_idx), config.n_paths, config.seed)
    oracle = hitting_probability(spec, a, x, b)
    checks.append(_check("hitting probability", est, oracle))

    est = estimate(chain, x_idx, ExitTime(a_idx, b_idx), config.n_paths,
                   config.seed + 1)
    oracle = expected_exit_time(spec, a, x, b).value
    checks.append(_check("expected exit time", est, oracle))

    lo_idx, hi_idx = (a_idx + x_idx) // 2, (x_idx + b_idx) // 2
    weights = np.zeros(n)
    weights[lo_idx:hi_idx + 1] = 1.0
    est = estimate(chain, x_idx, OccupationTime(a_idx, b_idx, tuple(weights)),
                   config.n_paths, config.seed + 2)
    # a marked grid point stands for the half-cells on both of its sides
    occ_lo = 0.5 * float(chain.grid[lo_idx - 1] + chain.grid[lo_idx])
    occ_hi = 0.5 * float(chain.grid[hi_idx] + chain.grid[hi_idx + 1])
    oracle = _occupation_oracle(spec, a, x, b, occ_lo, occ_hi)
    checks.append(_check("interval occupation", est, oracle))

    atom_cells = np.flatnonzero(chain.atom_share > 0)
    interior_atoms = [j for j in atom_cells if 0 < j < n - 1 and a_idx < j < b_idx]
    if interior_atoms:
        j = interior_atoms[0]
        weights = np.zeros(n)
        weights[j] = chain.atom_share[j]
        est = estimate(chain, x_idx, OccupationTime(a_idx, b_idx, tuple(weights)),
                       config.n_paths, config.seed + 3)
        oracle = green_kernel(spec, a, b, x, float(chain.grid[j])) \
            * spec.speed.atom_mass(float(chain.grid[j]))
        checks.append(_check("sticky occupation", est, oracle))

    if chain.recurrent() and not (chain.truncated_left or chain.truncated_right):
        f_vals = chain.grid.copy()
        est = estimate(chain, x_idx,
                       ErgodicAverage(tuple(f_vals), config.ergodic_horizon),
                       config.ergodic_paths, config.seed + 4)
        oracle = ergodic_oracle(spec, lambda ys: ys)
        checks.append(_check("ergodic average", est, oracle))

    return ValidationReport(checks=tuple(checks), n_paths=config.n_paths,
                            seed=config.seed, backend=kernels.BACKEND)


def _check(name: str, est: MonteCarloEstimate, oracle: float) -> ValidationCheck:
    se = est.std_error if est.std_error > 0 else 1e-300
    z = (est.value - oracle) / se
    return ValidationCheck(name=name, estimate=est.value, std_error=est.std_error,
                           oracle=oracle, z=z)
