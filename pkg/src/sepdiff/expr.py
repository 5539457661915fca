"""Closed-form expressions in a single variable ``x``.

Scale densities and speed densities are written in a deliberately small
grammar (arithmetic, real powers, exp/log/sqrt/abs).  The module provides
parsing, printing, IEEE-style evaluation, symbolic differentiation with
constant folding, and a numeric endpoint-exponent fit used to decide
convergence of improper integrals.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    """Raised on malformed input; carries the byte offset and expected tokens."""

    def __init__(self, message: str, offset: int, expected: tuple[str, ...] = ()):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.expected = expected


class UnknownFunctionError(ExprError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown function {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

FUNCTIONS = ("exp", "log", "sqrt", "abs")


@dataclass(frozen=True)
class Num:
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ExprError(f"non-finite constant {self.value!r}")


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Sub:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Mul:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Div:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: float  # constant real exponent, part of the node

    def __post_init__(self):
        if not math.isfinite(self.exponent):
            raise ExprError(f"non-finite exponent {self.exponent!r}")


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expr"

    def __post_init__(self):
        if self.fn not in FUNCTIONS:
            raise ExprError(f"unknown function {self.fn!r}")


Expr = Union[Num, Var, Add, Sub, Mul, Div, Pow, Neg, Call]

X = Var()


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_NUMBER_RE = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


class _Parser:
    def __init__(self, source: str):
        self.src = source
        self.pos = 0

    def _skip_ws(self):
        while self.pos < len(self.src) and self.src[self.pos].isspace():
            self.pos += 1

    def _peek(self) -> str:
        self._skip_ws()
        return self.src[self.pos] if self.pos < len(self.src) else ""

    def _expect(self, ch: str):
        if self._peek() != ch:
            raise ExprSyntaxError(f"expected {ch!r}", self.pos, (ch,))
        self.pos += 1

    def parse(self) -> Expr:
        e = self.expr()
        self._skip_ws()
        if self.pos != len(self.src):
            raise ExprSyntaxError("trailing input", self.pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            ch = self._peek()
            if ch == "+":
                self.pos += 1
                e = Add(e, self.term())
            elif ch == "-":
                self.pos += 1
                e = Sub(e, self.term())
            else:
                return e

    def term(self) -> Expr:
        e = self.factor()
        while True:
            ch = self._peek()
            if ch == "*":
                self.pos += 1
                e = Mul(e, self.factor())
            elif ch == "/":
                self.pos += 1
                e = Div(e, self.factor())
            else:
                return e

    def factor(self) -> Expr:
        e = self.atom()
        if self._peek() == "^":
            self.pos += 1
            return Pow(e, self.signed_number())
        return e

    def signed_number(self) -> float:
        # exponents are literal constants; a parenthesized form like "(-1)"
        # is accepted so that "x^(-1)" reads naturally
        if self._peek() == "(":
            self.pos += 1
            v = self.signed_number()
            self._expect(")")
            return v
        sign = 1.0
        if self._peek() == "-":
            self.pos += 1
            sign = -1.0
        self._skip_ws()
        m = _NUMBER_RE.match(self.src, self.pos)
        if not m:
            raise ExprSyntaxError("expected numeric exponent", self.pos, ("number",))
        self.pos = m.end()
        return sign * float(m.group(0))

    def atom(self) -> Expr:
        ch = self._peek()
        if ch == "":
            raise ExprSyntaxError("unexpected end of input", self.pos,
                                  ("number", "x", "(", "function", "-"))
        if ch == "-":
            self.pos += 1
            inner = self.atom()
            # fold a negated literal into the constant so printing round-trips
            if isinstance(inner, Num):
                return Num(-inner.value)
            return Neg(inner)
        if ch == "(":
            self.pos += 1
            e = self.expr()
            self._expect(")")
            return e
        m = _NUMBER_RE.match(self.src, self.pos)
        if m:
            self.pos = m.end()
            return Num(float(m.group(0)))
        m = _NAME_RE.match(self.src, self.pos)
        if m:
            name = m.group(0)
            start = self.pos
            self.pos = m.end()
            if name == "x":
                return Var()
            if self._peek() != "(":
                if name in FUNCTIONS:
                    raise ExprSyntaxError(f"expected '(' after {name!r}", self.pos, ("(",))
                raise ExprSyntaxError(f"unknown name {name!r}", start, ("x",))
            if name not in FUNCTIONS:
                raise UnknownFunctionError(name, start)
            self.pos += 1
            arg = self.expr()
            self._expect(")")
            return Call(name, arg)
        raise ExprSyntaxError(f"unexpected character {ch!r}", self.pos)


def parse_expression(source: str) -> Expr:
    """Parse ``source`` into an AST (grammar: + - * / ^const, exp/log/sqrt/abs)."""
    return _Parser(source).parse()


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_ATOM = 1, 2, 3, 4


def _fmt_const(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _prec(e: Expr) -> int:
    if isinstance(e, (Add, Sub)):
        return _PREC_ADD
    if isinstance(e, (Mul, Div)):
        return _PREC_MUL
    if isinstance(e, Neg):
        return _PREC_NEG
    if isinstance(e, Num) and e.value < 0:
        return _PREC_NEG  # prints with a leading '-'
    if isinstance(e, Pow):
        return _PREC_NEG  # 'atom^num' sits between unary and atom
    return _PREC_ATOM


def to_source(e: Expr) -> str:
    """Print ``e`` so that ``parse_expression(to_source(e))`` is structurally equal."""
    if isinstance(e, Num):
        return _fmt_const(e.value)
    if isinstance(e, Var):
        return "x"
    if isinstance(e, Call):
        return f"{e.fn}({to_source(e.arg)})"
    if isinstance(e, Neg):
        inner = to_source(e.operand)
        if _prec(e.operand) < _PREC_ATOM:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, Pow):
        base = to_source(e.base)
        if _prec(e.base) < _PREC_ATOM:
            base = f"({base})"
        exp = _fmt_const(e.exponent)
        if e.exponent < 0:
            exp = f"({exp})"
        return f"{base}^{exp}"
    if isinstance(e, (Add, Sub, Mul, Div)):
        op = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(e)]
        lvl = _prec(e)
        left = to_source(e.left)
        if _prec(e.left) < lvl:
            left = f"({left})"
        right = to_source(e.right)
        # grammar is left-associative: the right operand needs parens when it
        # sits at the same precedence level
        if _prec(e.right) <= lvl:
            right = f"({right})"
        return f"{left}{op}{right}"
    raise TypeError(f"not an Expr: {e!r}")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def eval_array(e: Expr, xs: np.ndarray) -> np.ndarray:
    """Vectorized IEEE-style evaluation; NaN marks an undefined point."""
    xs = np.asarray(xs, dtype=float)
    with np.errstate(all="ignore"):
        return _eval(e, xs)


def _eval(e: Expr, xs: np.ndarray) -> np.ndarray:
    if isinstance(e, Num):
        return np.full_like(xs, e.value)
    if isinstance(e, Var):
        return xs.copy()
    if isinstance(e, Neg):
        return -_eval(e.operand, xs)
    if isinstance(e, Add):
        return _eval(e.left, xs) + _eval(e.right, xs)
    if isinstance(e, Sub):
        return _eval(e.left, xs) - _eval(e.right, xs)
    if isinstance(e, Mul):
        return _eval(e.left, xs) * _eval(e.right, xs)
    if isinstance(e, Div):
        num, den = _eval(e.left, xs), _eval(e.right, xs)
        out = num / den
        out[den == 0.0] = np.nan
        return out
    if isinstance(e, Pow):
        base = _eval(e.base, xs)
        out = np.power(base, e.exponent)
        if e.exponent < 0:
            out[base == 0.0] = np.nan
        if e.exponent != int(e.exponent):
            out[base < 0.0] = np.nan
        return out
    if isinstance(e, Call):
        arg = _eval(e.arg, xs)
        if e.fn == "exp":
            return np.exp(arg)
        if e.fn == "log":
            out = np.log(arg)
            out[arg <= 0.0] = np.nan
            return out
        if e.fn == "sqrt":
            return np.sqrt(arg)
        if e.fn == "abs":
            return np.abs(arg)
    raise TypeError(f"not an Expr: {e!r}")


def evaluate(e: Expr, x: float) -> Optional[float]:
    """Evaluate at a single point; ``None`` when a sub-expression leaves its domain."""
    v = float(eval_array(e, np.array([x]))[0])
    return None if math.isnan(v) else v


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------

def fold(e: Expr) -> Expr:
    """Constant folding and trivial-identity elimination; no CAS rewriting."""
    if isinstance(e, (Num, Var)):
        return e
    if isinstance(e, Neg):
        a = fold(e.operand)
        if isinstance(a, Num):
            return Num(-a.value)
        if isinstance(a, Neg):
            return a.operand
        return Neg(a)
    if isinstance(e, Pow):
        b = fold(e.base)
        if e.exponent == 0.0:
            return Num(1.0)
        if isinstance(b, Num):
            v = _safe_arith(lambda: b.value ** e.exponent)
            if v is not None:
                return Num(v)
        return Pow(b, e.exponent)
    if isinstance(e, Call):
        a = fold(e.arg)
        if isinstance(a, Num):
            fn = {"exp": math.exp, "log": math.log, "sqrt": math.sqrt, "abs": abs}[e.fn]
            v = _safe_arith(lambda: fn(a.value))
            if v is not None:
                return Num(v)
        return Call(e.fn, a)
    l, r = fold(e.left), fold(e.right)
    if isinstance(l, Num) and isinstance(r, Num):
        op = {Add: lambda: l.value + r.value, Sub: lambda: l.value - r.value,
              Mul: lambda: l.value * r.value,
              Div: lambda: l.value / r.value if r.value != 0 else None}[type(e)]
        v = _safe_arith(op)
        if v is not None:
            return Num(v)
    if isinstance(e, Add):
        if isinstance(l, Num) and l.value == 0:
            return r
        if isinstance(r, Num) and r.value == 0:
            return l
        return Add(l, r)
    if isinstance(e, Sub):
        if isinstance(r, Num) and r.value == 0:
            return l
        return Sub(l, r)
    if isinstance(e, Mul):
        for c, other in ((l, r), (r, l)):
            if isinstance(c, Num):
                if c.value == 0:
                    return Num(0.0)
                if c.value == 1:
                    return other
        return Mul(l, r)
    if isinstance(e, Div):
        if isinstance(r, Num) and r.value == 1:
            return l
        if isinstance(l, Num) and l.value == 0:
            return Num(0.0)
        return Div(l, r)
    raise TypeError(f"not an Expr: {e!r}")


def _safe_arith(op) -> Optional[float]:
    try:
        v = op()
    except (ValueError, OverflowError, ZeroDivisionError):
        return None
    if v is None or isinstance(v, complex) or not math.isfinite(v):
        return None
    return float(v)


def derivative(e: Expr) -> Expr:
    """Symbolic d/dx, constant-folded.

    ``abs`` differentiates to ``arg/abs(arg)`` times the inner derivative,
    which is undefined at the kink; callers own breakpoints there.
    """
    return fold(_diff(e))


def _diff(e: Expr) -> Expr:
    if isinstance(e, Num):
        return Num(0.0)
    if isinstance(e, Var):
        return Num(1.0)
    if isinstance(e, Neg):
        return Neg(_diff(e.operand))
    if isinstance(e, Add):
        return Add(_diff(e.left), _diff(e.right))
    if isinstance(e, Sub):
        return Sub(_diff(e.left), _diff(e.right))
    if isinstance(e, Mul):
        return Add(Mul(_diff(e.left), e.right), Mul(e.left, _diff(e.right)))
    if isinstance(e, Div):
        num = Sub(Mul(_diff(e.left), e.right), Mul(e.left, _diff(e.right)))
        return Div(num, Pow(e.right, 2.0))
    if isinstance(e, Pow):
        return Mul(Mul(Num(e.exponent), Pow(e.base, e.exponent - 1.0)), _diff(e.base))
    if isinstance(e, Call):
        inner = _diff(e.arg)
        if e.fn == "exp":
            outer: Expr = Call("exp", e.arg)
        elif e.fn == "log":
            outer = Div(Num(1.0), e.arg)
        elif e.fn == "sqrt":
            outer = Div(Num(1.0), Mul(Num(2.0), Call("sqrt", e.arg)))
        elif e.fn == "abs":
            outer = Div(e.arg, Call("abs", e.arg))
        return Mul(outer, inner)
    raise TypeError(f"not an Expr: {e!r}")


# ---------------------------------------------------------------------------
# Multiplicative normalization
# ---------------------------------------------------------------------------

def _flatten_factors(e: Expr, num: list, den: list, into_num: bool):
    target, other = (num, den) if into_num else (den, num)
    if isinstance(e, Mul):
        _flatten_factors(e.left, num, den, into_num)
        _flatten_factors(e.right, num, den, into_num)
    elif isinstance(e, Div):
        _flatten_factors(e.left, num, den, into_num)
        _flatten_factors(e.right, num, den, not into_num)
    elif isinstance(e, Neg):
        target.append(Num(-1.0))
        _flatten_factors(e.operand, num, den, into_num)
    else:
        target.append(e)


def simplify_ratio(numerator: Expr, denominator: Optional[Expr] = None) -> Expr:
    """Combine exp factors and like-base powers across a product/quotient.

    Ratios and products of densities (s'_p/s'_q, s' * dm) routinely pair an
    overflowing factor with an underflowing one; merging exp arguments and
    power exponents keeps evaluation finite.  No other rewriting happens.
    """
    num: list[Expr] = []
    den: list[Expr] = []
    _flatten_factors(numerator, num, den, True)
    if denominator is not None:
        _flatten_factors(denominator, num, den, False)

    coeff = 1.0
    exp_args: list[Expr] = []
    powers: dict[Expr, float] = {}
    order: list[Expr] = []
    residual_num: list[Expr] = []
    residual_den: list[Expr] = []

    def absorb(factor: Expr, sign: float, residual: list[Expr]):
        nonlocal coeff
        if isinstance(factor, Num):
            if factor.value == 0.0:
                if sign > 0:
                    coeff *= 0.0
                else:
                    residual.append(factor)  # keep a literal division by zero
            elif sign > 0:
                coeff *= factor.value
            else:
                coeff /= factor.value
            return
        if isinstance(factor, Call) and factor.fn == "exp":
            exp_args.append(factor.arg if sign > 0 else Neg(factor.arg))
            return
        base, p = (factor.base, factor.exponent) if isinstance(factor, Pow) \
            else (factor, 1.0)
        if base not in powers:
            powers[base] = 0.0
            order.append(base)
        powers[base] += sign * p

    for f in num:
        absorb(f, +1.0, residual_num)
    for f in den:
        absorb(f, -1.0, residual_den)

    factors: list[Expr] = []
    if coeff != 1.0:
        factors.append(Num(coeff))
    if exp_args:
        total = exp_args[0]
        for a in exp_args[1:]:
            total = Add(total, a)
        factors.append(Call("exp", fold(total)))
    for base in order:
        p = powers[base]
        if p == 0.0:
            continue
        factors.append(base if p == 1.0 else Pow(base, p))
    factors.extend(residual_num)

    if not factors:
        out: Expr = Num(1.0)
    else:
        out = factors[0]
        for f in factors[1:]:
            out = Mul(out, f)
    for d in residual_den:
        out = Div(out, d)
    return fold(out)


# ---------------------------------------------------------------------------
# Endpoint exponent fit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LocalExponent:
    """f(x) behaves like C * |x - point|^exponent (times a log factor when
    log_flag is set) as x -> point; at infinite points the exponent is the
    growth exponent in |x|."""
    point: float
    exponent: float
    log_flag: bool


N_FIT_SAMPLES = 12
FIT_RESIDUAL_MAX = 0.05
LOG_DRIFT_MIN = 0.01


def exponent_fit_points(point: float, side: str) -> np.ndarray:
    """Geometric sample abscissae approaching ``point`` from ``side``."""
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    sgn = 1.0 if side == "right" else -1.0
    if math.isinf(point):
        # approaching +inf or -inf; side is implied by the sign of the point
        return (1.0 if point > 0 else -1.0) * 1e6 * 2.0 ** np.arange(N_FIT_SAMPLES)
    d0 = 1e-9 * max(1.0, abs(point))
    # innermost offset is relative 1e-9; successive samples double outward
    return point + sgn * d0 * 2.0 ** np.arange(N_FIT_SAMPLES)


def fit_exponent_from_samples(dist: np.ndarray, vals: np.ndarray) -> Optional[LocalExponent]:
    """Least-squares slope of log|f| against log(distance); None when unusable."""
    if not np.all(np.isfinite(vals)) or np.any(vals == 0.0):
        return None
    signs = np.sign(vals)
    if not np.all(signs == signs[0]):
        return None
    lx = np.log(dist)
    ly = np.log(np.abs(vals))
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    rms = float(np.sqrt(np.mean(resid ** 2)))
    if rms > FIT_RESIDUAL_MAX:
        return None
    half = len(lx) // 2
    s_in = np.polyfit(lx[:half], ly[:half], 1)[0]
    s_out = np.polyfit(lx[half:], ly[half:], 1)[0]
    drift = abs(float(s_in - s_out))
    return LocalExponent(point=math.nan, exponent=float(slope), log_flag=drift > LOG_DRIFT_MIN)


def local_exponent(e: Expr, point: float, side: str = "right") -> Optional[LocalExponent]:
    """Numeric behavior of ``e`` near ``point``; ``None`` means Unknown.

    For finite points the exponent is w.r.t. |x - point|.  For ``point``
    infinite the samples recede geometrically and the exponent reported is
    the growth exponent q with f(x) ~ C*|x|^q.
    """
    xs = exponent_fit_points(point, side)
    vals = eval_array(e, xs)
    dist = np.abs(xs) if math.isinf(point) else np.abs(xs - point)
    fit = fit_exponent_from_samples(dist, vals)
    if fit is None:
        return None
    return LocalExponent(point=point, exponent=fit.exponent, log_flag=fit.log_flag)
