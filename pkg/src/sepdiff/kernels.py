"""Path-sampling kernels: numba-compiled per-path loops with a vectorized
pure-numpy fallback.

Backend selection: numba is used when importable unless SEPDIFF_DISABLE_NUMBA
is set to a truthy value; SEPDIFF_THREADS caps the numba thread count.  Both
backends draw from identical counter-based per-path random streams (a
splitmix64 stream keyed by (seed, path index)), so results do not depend on
the backend's parallelism, and per-path outputs land in index order so the
final reduction is worker-count independent.

Statistics' outcome codes: 0 = hit lower target, 1 = hit upper target,
2 = stopped at an absorbing non-target grid end (truncation leak).
"""

from __future__ import annotations

import math
import os

import numpy as np

MODE_ABSORB = 0
MODE_REFLECT = 1

OUT_LOWER = 0
OUT_UPPER = 1
OUT_TRUNCATED = 2

NO_TARGET = -(1 << 30)  # sentinel index that never matches a grid point

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4B85B)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = 0.5 ** 53


def _env_flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in ("1", "true", "yes", "on")


def _pick_backend() -> str:
    if _env_flag("SEPDIFF_DISABLE_NUMBA"):
        return "numpy"
    try:
        import numba  # noqa: F401
        return "numba"
    except ImportError:
        return "numpy"


BACKEND = _pick_backend()


def mix64_array(z: np.ndarray) -> np.ndarray:
    z = z.copy()
    z ^= z >> np.uint64(30)
    z *= _MIX1
    z ^= z >> np.uint64(27)
    z *= _MIX2
    z ^= z >> np.uint64(31)
    return z


def stream_state(seed: int, n_paths: int) -> np.ndarray:
    """Initial per-path counter of the splitmix64 stream."""
    idx = np.arange(1, n_paths + 1, dtype=np.uint64)
    return mix64_array(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ mix64_array(idx))


def _uniform_from(counter: np.ndarray) -> np.ndarray:
    bits = mix64_array(counter)
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * _U53


# ---------------------------------------------------------------------------
# numpy fallback: batched frontier stepping across paths
# ---------------------------------------------------------------------------

def _np_draw(state0, ks, lanes):
    ks[lanes] += np.uint64(1)
    return _uniform_from(state0[lanes] + _GOLDEN * ks[lanes])


def _np_walk(p_up, hold, start, lower, upper, left_mode, right_mode,
             n_paths, seed, want_time, weight=None):
    """Shared frontier walk: returns (outcome codes, accumulated weighted time)."""
    n = len(p_up)
    state0 = stream_state(seed, n_paths)
    ks = np.zeros(n_paths, dtype=np.uint64)
    idx = np.full(n_paths, start, dtype=np.int64)
    acc = np.zeros(n_paths, dtype=np.float64)
    out = np.full(n_paths, -1, dtype=np.int8)
    active = np.ones(n_paths, dtype=bool)
    while np.any(active):
        lanes = np.flatnonzero(active)
        cur = idx[lanes]
        done_low = cur == lower
        done_up = cur == upper
        out[lanes[done_low]] = OUT_LOWER
        out[lanes[done_up]] = OUT_UPPER
        active[lanes[done_low | done_up]] = False
        lanes = lanes[~(done_low | done_up)]
        if len(lanes) == 0:
            break
        cur = idx[lanes]
        if want_time:
            w = np.ones(len(lanes)) if weight is None else weight[cur]
            need = w > 0
            if np.any(need):
                u = _np_draw(state0, ks, lanes[need])
                acc[lanes[need]] += w[need] * (-hold[cur[need]] * np.log(u))
        at_left = cur == 0
        at_right = cur == n - 1
        interior = ~(at_left | at_right)
        if np.any(interior):
            u = _np_draw(state0, ks, lanes[interior])
            step = np.where(u < p_up[cur[interior]], 1, -1)
            idx[lanes[interior]] = cur[interior] + step
        if np.any(at_left):
            if left_mode == MODE_REFLECT:
                idx[lanes[at_left]] = 1
            else:
                out[lanes[at_left]] = OUT_TRUNCATED
                active[lanes[at_left]] = False
        if np.any(at_right):
            if right_mode == MODE_REFLECT:
                idx[lanes[at_right]] = n - 2
            else:
                out[lanes[at_right]] = OUT_TRUNCATED
                active[lanes[at_right]] = False
    return out, acc


def _np_hit(p_up, start, lower, upper, left_mode, right_mode, n_paths, seed):
    hold = np.zeros_like(p_up)
    out, _ = _np_walk(p_up, hold, start, lower, upper, left_mode, right_mode,
                      n_paths, seed, want_time=False)
    return out


def _np_exit_time(p_up, hold, start, lower, upper, left_mode, right_mode,
                  n_paths, seed):
    return _np_walk(p_up, hold, start, lower, upper, left_mode, right_mode,
                    n_paths, seed, want_time=True)


def _np_occupation(p_up, hold, weight, start, lower, upper, left_mode,
                   right_mode, n_paths, seed):
    return _np_walk(p_up, hold, start, lower, upper, left_mode, right_mode,
                    n_paths, seed, want_time=True, weight=weight)


def _np_ergodic(p_up, hold, f_vals, start, horizon, left_mode, right_mode,
                n_paths, seed):
    n = len(p_up)
    state0 = stream_state(seed, n_paths)
    ks = np.zeros(n_paths, dtype=np.uint64)
    idx = np.full(n_paths, start, dtype=np.int64)
    t = np.zeros(n_paths)
    integral = np.zeros(n_paths)
    active = np.ones(n_paths, dtype=bool)
    while np.any(active):
        lanes = np.flatnonzero(active)
        cur = idx[lanes]
        u = _np_draw(state0, ks, lanes)
        dt = -hold[cur] * np.log(u)
        clip = np.minimum(dt, horizon - t[lanes])
        integral[lanes] += f_vals[cur] * clip
        t[lanes] += dt
        finished = t[lanes] >= horizon
        active[lanes[finished]] = False
        lanes = lanes[~finished]
        if len(lanes) == 0:
            break
        cur = idx[lanes]
        at_left = cur == 0
        at_right = cur == n - 1
        interior = ~(at_left | at_right)
        if np.any(interior):
            u = _np_draw(state0, ks, lanes[interior])
            step = np.where(u < p_up[cur[interior]], 1, -1)
            idx[lanes[interior]] = cur[interior] + step
        idx[lanes[at_left]] = 1
        idx[lanes[at_right]] = n - 2
    return integral / horizon


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------

if BACKEND == "numba":
    import numba
    from numba import njit, prange

    threads = os.environ.get("SEPDIFF_THREADS")
    if threads:
        numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))

    GOLDEN = 0x9E3779B97F4A7C15
    MASK = 0xFFFFFFFFFFFFFFFF

    @njit(cache=True, inline="always")
    def _mix(z):
        z = z & numba.uint64(MASK)
        z ^= z >> numba.uint64(30)
        z = (z * numba.uint64(0xBF58476D1CE4B85B)) & numba.uint64(MASK)
        z ^= z >> numba.uint64(27)
        z = (z * numba.uint64(0x94D049BB133111EB)) & numba.uint64(MASK)
        z ^= z >> numba.uint64(31)
        return z

    @njit(cache=True, inline="always")
    def _state0(seed, path):
        return _mix(numba.uint64(seed) ^ _mix(numba.uint64(path + 1)))

    @njit(cache=True, inline="always")
    def _uniform(s0, k):
        bits = _mix(s0 + numba.uint64(GOLDEN) * numba.uint64(k))
        return (np.float64(bits >> numba.uint64(11)) + 0.5) * _U53

    @njit(cache=True)
    def _one_hit(p_up, start, lower, upper, left_mode, right_mode, s0, n):
        k = numba.uint64(0)
        i = start
        while True:
            if i == lower:
                return np.int8(OUT_LOWER)
            if i == upper:
                return np.int8(OUT_UPPER)
            if i == 0:
                if left_mode != MODE_REFLECT:
                    return np.int8(OUT_TRUNCATED)
                i = 1
            elif i == n - 1:
                if right_mode != MODE_REFLECT:
                    return np.int8(OUT_TRUNCATED)
                i = n - 2
            else:
                k += numba.uint64(1)
                u = _uniform(s0, k)
                i = i + 1 if u < p_up[i] else i - 1

    @njit(cache=True)
    def _one_timed(p_up, hold, weight, start, lower, upper, left_mode,
                   right_mode, s0, n):
        k = numba.uint64(0)
        i = start
        total = 0.0
        while True:
            if i == lower:
                return np.int8(OUT_LOWER), total
            if i == upper:
                return np.int8(OUT_UPPER), total
            w = weight[i]
            if w > 0.0:
                k += numba.uint64(1)
                u = _uniform(s0, k)
                total += w * (-hold[i] * math.log(u))
            if i == 0:
                if left_mode != MODE_REFLECT:
                    return np.int8(OUT_TRUNCATED), total
                i = 1
            elif i == n - 1:
                if right_mode != MODE_REFLECT:
                    return np.int8(OUT_TRUNCATED), total
                i = n - 2
            else:
                k += numba.uint64(1)
                u = _uniform(s0, k)
                i = i + 1 if u < p_up[i] else i - 1

    @njit(cache=True)
    def _one_ergodic(p_up, hold, f_vals, start, horizon, s0, n):
        k = numba.uint64(0)
        i = start
        t = 0.0
        integral = 0.0
        while t < horizon:
            k += numba.uint64(1)
            u = _uniform(s0, k)
            dt = -hold[i] * math.log(u)
            clip = dt if t + dt <= horizon else horizon - t
            integral += f_vals[i] * clip
            t += dt
            if t >= horizon:
                break
            if i == 0:
                i = 1
            elif i == n - 1:
                i = n - 2
            else:
                k += numba.uint64(1)
                u = _uniform(s0, k)
                i = i + 1 if u < p_up[i] else i - 1
        return integral / horizon

    @njit(cache=True, parallel=True)
    def _nb_hit(p_up, start, lower, upper, left_mode, right_mode, n_paths, seed):
        n = len(p_up)
        out = np.empty(n_paths, dtype=np.int8)
        for path in prange(n_paths):
            s0 = _state0(seed, path)
            out[path] = _one_hit(p_up, start, lower, upper, left_mode,
                                 right_mode, s0, n)
        return out

    @njit(cache=True, parallel=True)
    def _nb_timed(p_up, hold, weight, start, lower, upper, left_mode,
                  right_mode, n_paths, seed):
        n = len(p_up)
        out = np.empty(n_paths, dtype=np.int8)
        acc = np.zeros(n_paths, dtype=np.float64)
        for path in prange(n_paths):
            s0 = _state0(seed, path)
            code, total = _one_timed(p_up, hold, weight, start, lower, upper,
                                     left_mode, right_mode, s0, n)
            out[path] = code
            acc[path] = total
        return out, acc

    @njit(cache=True, parallel=True)
    def _nb_ergodic(p_up, hold, f_vals, start, horizon, left_mode, right_mode,
                    n_paths, seed):
        n = len(p_up)
        avg = np.empty(n_paths, dtype=np.float64)
        for path in prange(n_paths):
            s0 = _state0(seed, path)
            avg[path] = _one_ergodic(p_up, hold, f_vals, start, horizon, s0, n)
        return avg


# ---------------------------------------------------------------------------
# public dispatch
# ---------------------------------------------------------------------------

def hit_paths(p_up: np.ndarray, start: int, lower: int, upper: int,
              left_mode: int, right_mode: int, n_paths: int, seed: int) -> np.ndarray:
    """Outcome code per path for the first-passage race lower-vs-upper."""
    if BACKEND == "numba":
        return _nb_hit(p_up, start, lower, upper, left_mode, right_mode,
                       n_paths, seed)
    return _np_hit(p_up, start, lower, upper, left_mode, right_mode,
                   n_paths, seed)


def timed_paths(p_up: np.ndarray, hold: np.ndarray, weight: np.ndarray,
                start: int, lower: int, upper: int, left_mode: int,
                right_mode: int, n_paths: int, seed: int):
    """(outcome codes, weighted occupation time before stopping) per path.

    weight == 1 everywhere gives first-exit times; a sparse weight vector
    gives occupation times of the weighted cells.
    """
    if BACKEND == "numba":
        return _nb_timed(p_up, hold, weight, start, lower, upper, left_mode,
                         right_mode, n_paths, seed)
    if np.all(weight == 1.0):
        return _np_exit_time(p_up, hold, start, lower, upper, left_mode,
                             right_mode, n_paths, seed)
    return _np_occupation(p_up, hold, weight, start, lower, upper, left_mode,
                          right_mode, n_paths, seed)


def ergodic_paths(p_up: np.ndarray, hold: np.ndarray, f_vals: np.ndarray,
                  start: int, horizon: float, left_mode: int, right_mode: int,
                  n_paths: int, seed: int) -> np.ndarray:
    """Per-path time averages of f over [0, horizon] on a reflecting chain."""
    if BACKEND == "numba":
        return _nb_ergodic(p_up, hold, f_vals, start, horizon, left_mode,
                           right_mode, n_paths, seed)
    return _np_ergodic(p_up, hold, f_vals, start, horizon, left_mode,
                       right_mode, n_paths, seed)
