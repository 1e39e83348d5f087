"""Formula expression trees: parsing, point and interval evaluation.

Grammar (whitespace insignificant)::

    expr   := term (("+"|"-") term)*
    term   := factor (("*"|"/") factor)*
    factor := NUMBER | SYMBOL | "-" factor | "(" expr ")"
            | FUNC "(" expr ("," expr)* ")"
    FUNC   := "min" | "max" | "clamp"
    SYMBOL := [A-Za-z_][A-Za-z0-9_]*
    NUMBER := decimal literal with optional fraction
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np


class FormulaSyntaxError(ValueError):
    """Raised on malformed formula text; carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class EvalError(ValueError):
    """Raised when evaluation is impossible for the given bindings."""


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo <= self.hi):
            raise ValueError(f"interval lo {self.lo} > hi {self.hi}")
        if not (_finite(self.lo) and _finite(self.hi)):
            raise ValueError(f"interval endpoints must be finite: [{self.lo}, {self.hi}]")

    @staticmethod
    def point(v: float) -> "Interval":
        return Interval(v, v)

    @property
    def mid(self) -> float:
        return (self.lo + self.hi) / 2.0

    def contains(self, other: "Interval", slack: float = 0.0) -> bool:
        return self.lo - slack <= other.lo and other.hi <= self.hi + slack


def _finite(x: float) -> bool:
    return x == x and x not in (float("inf"), float("-inf"))


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Sym:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str  # min | max | clamp
    args: tuple["Expr", ...]


Expr = Union[Num, Sym, Neg, BinOp, Call]

_FUNCS = {"min": 2, "max": 2, "clamp": 3}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<sym>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[+\-*/(),]))"
)


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.pos = 0
        self.tokens: list[tuple[str, str, int]] = []
        self._tokenize()
        self.idx = 0

    def _tokenize(self):
        pos = 0
        src = self.source
        while pos < len(src):
            m = _TOKEN_RE.match(src, pos)
            if m is None:
                stripped = src[pos:].lstrip()
                if not stripped:
                    break
                raise FormulaSyntaxError(
                    f"unexpected character {stripped[0]!r}", len(src) - len(stripped)
                )
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()

    def _peek(self):
        if self.idx < len(self.tokens):
            return self.tokens[self.idx]
        return ("eof", "", len(self.source))

    def _next(self):
        tok = self._peek()
        self.idx += 1
        return tok

    def _expect(self, value: str):
        kind, text, off = self._next()
        if text != value:
            raise FormulaSyntaxError(f"expected {value!r}, found {text or 'end-of-input'!r}", off)

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, off = self._peek()
        if kind != "eof":
            raise FormulaSyntaxError(f"trailing input {text!r}", off)
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self._peek()[1] in ("+", "-"):
            op = self._next()[1]
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.factor()
        while self._peek()[1] in ("*", "/"):
            op = self._next()[1]
            left = BinOp(op, left, self.factor())
        return left

    def factor(self) -> Expr:
        kind, text, off = self._next()
        if kind == "num":
            return Num(float(text))
        if kind == "sym":
            if self._peek()[1] == "(":
                if text not in _FUNCS:
                    raise FormulaSyntaxError(f"unknown function {text!r}", off)
                self._expect("(")
                args = [self.expr()]
                while self._peek()[1] == ",":
                    self._next()
                    args.append(self.expr())
                self._expect(")")
                if len(args) != _FUNCS[text]:
                    raise FormulaSyntaxError(
                        f"{text} takes {_FUNCS[text]} arguments, got {len(args)}", off
                    )
                return Call(text, tuple(args))
            return Sym(text)
        if text == "-":
            return Neg(self.factor())
        if text == "(":
            e = self.expr()
            self._expect(")")
            return e
        raise FormulaSyntaxError(f"unexpected {text or 'end-of-input'!r}", off)


def parse_formula(source: str) -> Expr:
    """Parse formula text into an expression tree."""
    return _Parser(source).parse()


def format_formula(e: Expr) -> str:
    """Render an expression tree back to parseable text.

    parse_formula(format_formula(e)) is structurally equal to e.
    """
    return _fmt(e, 0)


# precedence: 0 additive, 1 multiplicative, 2 unary minus, 3 atoms
def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return 0 if e.op in "+-" else 1
    if isinstance(e, Neg):
        return 2
    return 3


def _fmt(e: Expr, ctx: int) -> str:
    if isinstance(e, Num):
        v = e.value
        s = repr(int(v)) if v == int(v) else repr(v)
        return f"({s})" if v < 0 else s
    elif isinstance(e, Sym):
        s = e.name
    elif isinstance(e, Neg):
        s = "-" + _fmt(e.operand, 2)
    elif isinstance(e, Call):
        s = f"{e.func}({', '.join(_fmt(a, 0) for a in e.args)})"
    else:
        prec = _prec(e)
        # right side re-parenthesized at equal precedence (left associativity)
        s = f"{_fmt(e.left, prec)} {e.op} {_fmt(e.right, prec + 1)}"
    return f"({s})" if _prec(e) < ctx else s


def free_symbols(e: Expr) -> set[str]:
    if isinstance(e, Num):
        return set()
    if isinstance(e, Sym):
        return {e.name}
    if isinstance(e, Neg):
        return free_symbols(e.operand)
    if isinstance(e, Call):
        out: set[str] = set()
        for a in e.args:
            out |= free_symbols(a)
        return out
    return free_symbols(e.left) | free_symbols(e.right)


def symbol_occurrences(e: Expr) -> list[str]:
    """All symbol leaves in order, with repeats."""
    if isinstance(e, Num):
        return []
    if isinstance(e, Sym):
        return [e.name]
    if isinstance(e, Neg):
        return symbol_occurrences(e.operand)
    if isinstance(e, Call):
        return [s for a in e.args for s in symbol_occurrences(a)]
    return symbol_occurrences(e.left) + symbol_occurrences(e.right)


def depth(e: Expr) -> int:
    """Operator nesting depth; atoms have depth 0."""
    if isinstance(e, (Num, Sym)):
        return 0
    if isinstance(e, Neg):
        return 1 + depth(e.operand)
    if isinstance(e, Call):
        return 1 + max(depth(a) for a in e.args)
    return 1 + max(depth(e.left), depth(e.right))


# ---------------------------------------------------------------------------
# Evaluation


def eval_point(e: Expr, bindings: Mapping[str, float]) -> float:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Sym):
        if e.name not in bindings:
            raise EvalError(f"unbound symbol {e.name!r}")
        return float(bindings[e.name])
    if isinstance(e, Neg):
        return -eval_point(e.operand, bindings)
    if isinstance(e, Call):
        args = [eval_point(a, bindings) for a in e.args]
        if e.func == "min":
            return min(args)
        if e.func == "max":
            return max(args)
        x, lo, hi = args
        if lo > hi:
            raise EvalError(f"clamp bounds reversed: lo {lo} > hi {hi}")
        return min(max(x, lo), hi)
    left = eval_point(e.left, bindings)
    right = eval_point(e.right, bindings)
    if e.op == "+":
        return left + right
    if e.op == "-":
        return left - right
    if e.op == "*":
        return left * right
    if right == 0:
        raise EvalError(f"division by zero in {format_formula(e)!r}")
    return left / right


def eval_interval(e: Expr, bindings: Mapping[str, Interval]) -> Interval:
    """Interval extension of eval_point: sound over-approximation of the range."""
    if isinstance(e, Num):
        return Interval.point(e.value)
    if isinstance(e, Sym):
        if e.name not in bindings:
            raise EvalError(f"unbound symbol {e.name!r}")
        return bindings[e.name]
    if isinstance(e, Neg):
        v = eval_interval(e.operand, bindings)
        return Interval(-v.hi, -v.lo)
    if isinstance(e, Call):
        args = [eval_interval(a, bindings) for a in e.args]
        if e.func == "min":
            a, b = args
            return Interval(min(a.lo, b.lo), min(a.hi, b.hi))
        if e.func == "max":
            a, b = args
            return Interval(max(a.lo, b.lo), max(a.hi, b.hi))
        x, lo, hi = args
        inner = Interval(max(x.lo, lo.lo), max(x.hi, lo.hi))
        return Interval(min(inner.lo, hi.lo), min(inner.hi, hi.hi))
    left = eval_interval(e.left, bindings)
    right = eval_interval(e.right, bindings)
    if e.op == "+":
        return Interval(left.lo + right.lo, left.hi + right.hi)
    if e.op == "-":
        return Interval(left.lo - right.hi, left.hi - right.lo)
    if e.op == "*":
        products = (left.lo * right.lo, left.lo * right.hi, left.hi * right.lo, left.hi * right.hi)
        return Interval(min(products), max(products))
    if right.lo <= 0.0 <= right.hi:
        raise EvalError(
            f"denominator interval [{right.lo}, {right.hi}] touches zero "
            f"in {format_formula(e)!r}"
        )
    quotients = (left.lo / right.lo, left.lo / right.hi, left.hi / right.lo, left.hi / right.hi)
    return Interval(min(quotients), max(quotients))


def _eval_array(e: Expr, bindings: Mapping[str, np.ndarray]) -> np.ndarray:
    """Vectorized eval_point over aligned grids; same error conditions."""
    if isinstance(e, Num):
        return np.asarray(e.value)
    if isinstance(e, Sym):
        if e.name not in bindings:
            raise EvalError(f"unbound symbol {e.name!r}")
        return bindings[e.name]
    if isinstance(e, Neg):
        return -_eval_array(e.operand, bindings)
    if isinstance(e, Call):
        args = [_eval_array(a, bindings) for a in e.args]
        if e.func == "min":
            return np.minimum(args[0], args[1])
        if e.func == "max":
            return np.maximum(args[0], args[1])
        x, lo, hi = args
        if np.any(lo > hi):
            raise EvalError("clamp bounds reversed: lo > hi")
        return np.minimum(np.maximum(x, lo), hi)
    left = _eval_array(e.left, bindings)
    right = _eval_array(e.right, bindings)
    if e.op == "+":
        return left + right
    if e.op == "-":
        return left - right
    if e.op == "*":
        return left * right
    if np.any(right == 0):
        raise EvalError(f"division by zero in {format_formula(e)!r}")
    return left / right


def brute_force_range(
    e: Expr, bindings: Mapping[str, Interval], grid_steps: int
) -> Interval:
    """Grid-search oracle for the true range; exponential in symbol count."""
    if grid_steps < 1:
        raise ValueError("grid_steps must be positive")
    names = sorted(free_symbols(e))
    if len(names) > 4:
        raise ValueError(f"brute_force_range limited to 4 symbols, got {len(names)}")
    for n in names:
        if n not in bindings:
            raise EvalError(f"unbound symbol {n!r}")

    if not names:
        v = eval_point(e, {})
        return Interval(v, v)

    axes = [
        np.linspace(bindings[n].lo, bindings[n].hi, grid_steps) for n in names
    ]
    shape = tuple(grid_steps for _ in names)

    def extrema(sub_axes, sub_shape):
        grids = dict(zip(names[-len(sub_axes):], np.meshgrid(*sub_axes, indexing="ij", sparse=True)))
        grids.update(fixed)
        values = np.broadcast_to(_eval_array(e, grids), sub_shape)
        return float(values.min()), float(values.max())

    fixed: dict[str, np.ndarray] = {}
    if grid_steps ** len(names) <= 1 << 24:
        lo, hi = extrema(axes, shape)
        return Interval(lo, hi)

    # slice along the first axis to bound peak memory on dense grids
    lo = hi = None
    for v in axes[0]:
        fixed = {names[0]: np.asarray(v)}
        slo, shi = extrema(axes[1:], shape[1:])
        lo = slo if lo is None else min(lo, slo)
        hi = shi if hi is None else max(hi, shi)
    return Interval(lo, hi)
