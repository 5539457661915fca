"""Reading and writing diffusion spec files (TOML).

A spec file holds the state space, the scale density pieces with an anchor,
and the speed measure (density pieces, atoms, tail overrides).  Infinite
values are written as the strings "inf"/"-inf".
"""

from __future__ import annotations

import math
from typing import Any

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .expr import parse_expression, to_source
from .model import DiffusionSpec, Override, ScaleFunction, SpeedMeasure, StateSpace

__all__ = ["SpecFileError", "load_spec", "parse_spec_toml", "spec_to_toml"]


class SpecFileError(ValueError):
    pass


def _number(v: Any, where: str) -> float:
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("inf", "+inf", "infinity"):
            return math.inf
        if s in ("-inf", "-infinity"):
            return -math.inf
        raise SpecFileError(f"{where}: expected a number or 'inf', got {v!r}")
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    raise SpecFileError(f"{where}: expected a number, got {v!r}")


def _require(table: dict, key: str, where: str) -> Any:
    if key not in table:
        raise SpecFileError(f"{where}: missing required key {key!r}")
    return table[key]


def parse_spec_toml(text: str, where: str = "<spec>") -> DiffusionSpec:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SpecFileError(f"{where}: not valid TOML: {exc}") from exc

    space_t = _require(doc, "space", where)
    space = StateSpace(
        l=_number(_require(space_t, "l", f"{where}.space"), f"{where}.space.l"),
        r=_number(_require(space_t, "r", f"{where}.space"), f"{where}.space.r"),
        l_closed=bool(space_t.get("l_closed", False)),
        r_closed=bool(space_t.get("r_closed", False)),
    )

    scale_t = _require(doc, "scale", where)
    anchor = _require(scale_t, "anchor", f"{where}.scale")
    if not (isinstance(anchor, list) and len(anchor) == 2):
        raise SpecFileError(f"{where}.scale.anchor: expected [point, value]")
    try:
        scale = ScaleFunction(
            breakpoints=tuple(_number(b, f"{where}.scale.breakpoints")
                              for b in scale_t.get("breakpoints", [])),
            pieces=tuple(parse_expression(s)
                         for s in _require(scale_t, "pieces", f"{where}.scale")),
            anchor_point=_number(anchor[0], f"{where}.scale.anchor"),
            anchor_value=_number(anchor[1], f"{where}.scale.anchor"),
        )
        speed_t = _require(doc, "speed", where)
        atoms = []
        for pair in speed_t.get("atoms", []):
            if not (isinstance(pair, list) and len(pair) == 2):
                raise SpecFileError(f"{where}.speed.atoms: expected [location, mass]")
            atoms.append((_number(pair[0], f"{where}.speed.atoms"),
                          _number(pair[1], f"{where}.speed.atoms")))
        overrides = []
        for ov in speed_t.get("overrides", []):
            if not (isinstance(ov, list) and len(ov) == 3):
                raise SpecFileError(
                    f"{where}.speed.overrides: expected [point, side, verdict]")
            point = _number(ov[0], f"{where}.speed.overrides")
            side, verdict = str(ov[1]), str(ov[2])
            if side not in ("left", "right"):
                raise SpecFileError(f"{where}.speed.overrides: side must be left/right")
            if verdict not in ("finite", "infinite"):
                raise SpecFileError(
                    f"{where}.speed.overrides: verdict must be finite/infinite")
            overrides.append(Override(point=point, side=side,
                                      finite=(verdict == "finite")))
        speed = SpeedMeasure(
            breakpoints=tuple(_number(b, f"{where}.speed.breakpoints")
                              for b in speed_t.get("breakpoints", [])),
            pieces=tuple(parse_expression(s)
                         for s in _require(speed_t, "pieces", f"{where}.speed")),
            atoms=tuple(sorted(atoms)),
            integrability_overrides=tuple(overrides),
        )
    except SpecFileError:
        raise
    except ValueError as exc:
        raise SpecFileError(f"{where}: {exc}") from exc
    return DiffusionSpec(space=space, scale=scale, speed=speed,
                         label=str(doc.get("label", "")))


def load_spec(path: str) -> DiffusionSpec:
    with open(path, "rb") as fh:
        text = fh.read().decode("utf-8")
    return parse_spec_toml(text, where=path)


def _fmt(v: float) -> str:
    if v == math.inf:
        return '"inf"'
    if v == -math.inf:
        return '"-inf"'
    if v == int(v) and abs(v) < 1e15:
        return f"{v:.1f}"
    return repr(v)


def spec_to_toml(spec: DiffusionSpec) -> str:
    """Serialize a spec in the file syntax (round-trips through load)."""
    lines = [f'label = "{spec.label}"', "", "[space]"]
    lines += [f"l = {_fmt(spec.space.l)}", f"r = {_fmt(spec.space.r)}",
              f"l_closed = {'true' if spec.space.l_closed else 'false'}",
              f"r_closed = {'true' if spec.space.r_closed else 'false'}", ""]
    lines += ["[scale]",
              f"anchor = [{_fmt(spec.scale.anchor_point)}, {_fmt(spec.scale.anchor_value)}]",
              "breakpoints = [" + ", ".join(_fmt(b) for b in spec.scale.breakpoints) + "]",
              "pieces = [" + ", ".join(f'"{to_source(p)}"' for p in spec.scale.pieces) + "]",
              ""]
    atoms = ", ".join(f"[{_fmt(a)}, {_fmt(m)}]" for a, m in spec.speed.atoms)
    overrides = ", ".join(
        f'[{_fmt(o.point)}, "{o.side}", "{"finite" if o.finite else "infinite"}"]'
        for o in spec.speed.integrability_overrides)
    lines += ["[speed]",
              "breakpoints = [" + ", ".join(_fmt(b) for b in spec.speed.breakpoints) + "]",
              "pieces = [" + ", ".join(f'"{to_source(p)}"' for p in spec.speed.pieces) + "]",
              f"atoms = [{atoms}]",
              f"overrides = [{overrides}]", ""]
    return "\n".join(lines)
