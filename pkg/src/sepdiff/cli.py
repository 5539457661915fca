"""Command-line front end: classify, separate, nflvr, simulate, validate.

Reads TOML spec files, prints a JSON report envelope to stdout, and writes
CSV path dumps to --out when asked.  Exit codes: 0 success, 2 spec/validation
failure, 3 inconclusive integral without an override, 4 domain mismatch,
5 state space not lower-bounded, 6 missing truncation, 7 simulator failed
its analytic validation.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
from datetime import datetime, timezone
from typing import Any, Optional

import numpy as np

from . import __version__, kernels
from .chain import UnboundedDomainWithoutTruncation, build_chain
from .model import (
    DiffusionSpec, InconclusiveTail, InternalInconsistency, QuadratureFailure,
    classify_boundary, scale_density_at, validate_spec,
)
from .montecarlo import (
    ErgodicAverage, ExitTime, HitBefore, OccupationTime, ValidationConfig,
    estimate, sample_path, validate_against_analytic,
)
from .nflvr import NotLowerBounded, nflvr_verdict
from .separating import DomainMismatch, Inconclusive, separation_report
from .specfile import SpecFileError, load_spec, spec_to_toml

EXIT_OK = 0
EXIT_INVALID_SPEC = 2
EXIT_INCONCLUSIVE = 3
EXIT_DOMAIN_MISMATCH = 4
EXIT_NOT_LOWER_BOUNDED = 5
EXIT_NEEDS_TRUNCATION = 6
EXIT_VALIDATION_FAILED = 7


def _sanitize(obj: Any) -> Any:
    """JSON-safe encoding: inf -> 'inf', Delta/None -> 'none', dataclasses -> dicts."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _sanitize(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(float(v)) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if obj is None:
        return "none"
    if isinstance(obj, float):
        if obj == math.inf:
            return "inf"
        if obj == -math.inf:
            return "-inf"
        if math.isnan(obj):
            return "nan"
    return obj


def _digest(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _envelope(command: str, inputs: list[str], payload: Any,
              diagnostics: list[str]) -> dict:
    return {
        "tool": {"name": "sepdiff", "version": __version__},
        "command": command,
        "inputs": [{"path": p, "sha256": _digest(p)} for p in inputs],
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "payload": _sanitize(payload),
        "diagnostics": diagnostics,
    }


def _emit(env: dict) -> None:
    json.dump(env, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _load_valid(path: str, diagnostics: list[str]) -> DiffusionSpec:
    spec = load_spec(path)
    violations = validate_spec(spec)
    if violations:
        for v in violations:
            print(f"error: {path}: {v.code} at {v.where}: {v.message}",
                  file=sys.stderr)
        raise _Exit(EXIT_INVALID_SPEC)
    return spec


class _Exit(Exception):
    def __init__(self, code: int):
        self.code = code


def _spec_summary(spec: DiffusionSpec) -> dict:
    return {"label": spec.label,
            "space": {"l": spec.space.l, "r": spec.space.r,
                      "l_closed": spec.space.l_closed,
                      "r_closed": spec.space.r_closed}}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_classify(args) -> int:
    diagnostics: list[str] = []
    spec = _load_valid(args.spec, diagnostics)
    boundaries = {side: classify_boundary(spec, side) for side in ("l", "r")}
    critical = []
    pts = sorted({*spec.scale.breakpoints, *spec.speed.breakpoints,
                  *[a for a, _ in spec.speed.atoms
                    if spec.space.l < a < spec.space.r]})
    for pt in pts:
        critical.append({
            "point": pt,
            "scale_density_left": scale_density_at(spec, pt, "left"),
            "scale_density_right": scale_density_at(spec, pt, "right"),
            "atom_mass": spec.speed.atom_mass(pt),
        })
    payload = {**_spec_summary(spec), "boundaries": boundaries,
               "critical_points": critical}
    _emit(_envelope("classify", [args.spec], payload, diagnostics))
    return EXIT_OK


def _cmd_separate(args) -> int:
    diagnostics: list[str] = []
    p = _load_valid(args.spec1, diagnostics)
    q = _load_valid(args.spec2, diagnostics)
    rep = separation_report(p, q, args.x0)
    payload = {"first": _spec_summary(p), "second": _spec_summary(q),
               "x0": args.x0, "report": rep}
    _emit(_envelope("separate", [args.spec1, args.spec2], payload, diagnostics))
    return EXIT_OK


def _cmd_nflvr(args) -> int:
    diagnostics: list[str] = []
    spec = _load_valid(args.spec, diagnostics)
    rep = nflvr_verdict(spec, horizon=args.horizon)
    payload: dict = {**_spec_summary(spec), "horizon": args.horizon,
                     "report": rep}
    if rep.elmm is not None:
        payload["elmm_specfile"] = spec_to_toml(rep.elmm)
    _emit(_envelope("nflvr", [args.spec], payload, diagnostics))
    return EXIT_OK


def _parse_truncate(arg: Optional[str]):
    if not arg:
        return None
    parts = arg.split(",")
    if len(parts) != 2:
        raise _UsageError("--truncate expects LO,HI (use 'none' to skip a side)")

    def side(s):
        s = s.strip().lower()
        return None if s in ("none", "") else float(s)

    return side(parts[0]), side(parts[1])


class _UsageError(ValueError):
    pass


def _cmd_simulate(args) -> int:
    diagnostics: list[str] = []
    spec = _load_valid(args.spec, diagnostics)
    chain = build_chain(spec, args.cells, truncate=_parse_truncate(args.truncate),
                        truncation_mode=args.truncate_mode)
    if chain.truncated_left or chain.truncated_right:
        diagnostics.append("grid truncated; estimates carry truncation leakage")
    n = chain.n
    a_idx, x_idx, b_idx = n // 8, n // 2, n - 1 - n // 8
    estimates = {
        "hit_upper_before_lower": estimate(
            chain, x_idx, HitBefore(a_idx, b_idx), args.paths, args.seed),
        "exit_time": estimate(
            chain, x_idx, ExitTime(a_idx, b_idx), args.paths, args.seed + 1),
    }
    payload = {**_spec_summary(spec), "backend": kernels.BACKEND,
               "cells": args.cells, "paths": args.paths, "seed": args.seed,
               "grid": {"lo": float(chain.grid[0]), "hi": float(chain.grid[-1]),
                        "points": chain.n},
               "window": {"lower": float(chain.grid[a_idx]),
                          "start": float(chain.grid[x_idx]),
                          "upper": float(chain.grid[b_idx])},
               "estimates": estimates}
    if args.dump:
        out_dir = args.out or "paths_out"
        os.makedirs(out_dir, exist_ok=True)
        n_dump = min(args.paths, args.dump_paths)
        for pi in range(n_dump):
            ps = sample_path(chain, x_idx, (a_idx, b_idx), args.seed, pi)
            fname = os.path.join(out_dir, f"path_{pi:05d}.csv")
            with open(fname, "w") as fh:
                fh.write("state,holding_duration\n")
                for s, d in zip(ps.states, ps.durations):
                    fh.write(f"{s!r},{d!r}\n")
        diagnostics.append(f"dumped {n_dump} paths to {out_dir}")
    _emit(_envelope("simulate", [args.spec], payload, diagnostics))
    return EXIT_OK


def _cmd_validate(args) -> int:
    diagnostics: list[str] = []
    spec = _load_valid(args.spec, diagnostics)
    config = ValidationConfig(n_cells=args.cells, n_paths=args.paths,
                              seed=args.seed,
                              truncate=_parse_truncate(args.truncate),
                              truncation_mode=args.truncate_mode)
    report = validate_against_analytic(spec, config)
    payload = {**_spec_summary(spec), "backend": report.backend,
               "report": report}
    _emit(_envelope("validate", [args.spec], payload, diagnostics))
    return EXIT_OK if report.passed else EXIT_VALIDATION_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sepdiff",
        description="Analyze one-dimensional diffusions given by scale and speed: "
                    "boundary classification, separating points, NFLVR checks, "
                    "and a validating Monte Carlo simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", help="boundary classification of one spec")
    c.add_argument("spec")
    c.set_defaults(fn=_cmd_classify)

    s = sub.add_parser("separate", help="separating-set report for two specs")
    s.add_argument("spec1")
    s.add_argument("spec2")
    s.add_argument("--x0", type=float, required=True, help="start value")
    s.set_defaults(fn=_cmd_separate)

    nf = sub.add_parser("nflvr", help="no-free-lunch screening for one spec")
    nf.add_argument("spec")
    nf.add_argument("--horizon", choices=("finite", "infinite"), default="finite")
    nf.set_defaults(fn=_cmd_nflvr)

    for name, fn in (("simulate", _cmd_simulate), ("validate", _cmd_validate)):
        sp = sub.add_parser(name, help=f"{name} the birth-death chain sampler")
        sp.add_argument("spec")
        sp.add_argument("--cells", type=int, default=200)
        sp.add_argument("--paths", type=int, default=20_000)
        sp.add_argument("--seed", type=int, default=7)
        sp.add_argument("--truncate", default=None, metavar="LO,HI",
                        help="truncation levels for inaccessible endpoints "
                             "('none' keeps a side untruncated)")
        sp.add_argument("--truncate-mode", choices=("absorb", "reflect"),
                        default="absorb")
        if name == "simulate":
            sp.add_argument("--dump", action="store_true",
                            help="write per-path CSV files to --out")
            sp.add_argument("--dump-paths", type=int, default=64,
                            help="cap on the number of dumped paths")
            sp.add_argument("--out", default=None, metavar="DIR",
                            help="directory for CSV output (default paths_out)")
        sp.set_defaults(fn=fn)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except _Exit as exc:
        return exc.code
    except (SpecFileError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_SPEC
    except (Inconclusive, InconclusiveTail) as exc:
        print(f"error: inconclusive without an override: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except DomainMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN_MISMATCH
    except NotLowerBounded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_LOWER_BOUNDED
    except UnboundedDomainWithoutTruncation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NEEDS_TRUNCATION
    except (QuadratureFailure, InternalInconsistency, _UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_SPEC


if __name__ == "__main__":
    sys.exit(main())
