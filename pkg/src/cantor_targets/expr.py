"""Arithmetic expressions in one integer variable ``n``.

Grammar (usual precedence, ``^`` right-associative and binding tighter
than unary minus)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("-" | "+") unary | power
    power  := atom (("^" | "**") unary)?
    atom   := number | "n" | "pi" | "e" | name "(" expr ")" | "(" expr ")"

Functions: floor, ceil, sqrt, cbrt, log, exp, cos, sin, abs.

Two evaluators share the AST. :func:`evaluate` is exact where it can be
(rationals stay :class:`~fractions.Fraction`) and falls back to arb balls,
escalating precision until every ``floor`` is decided.
:func:`evaluate_array` is the float64 fast path; it also returns a mask of
entries whose float value cannot be trusted, for the caller to redo
exactly.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from flint import arb, ctx

from .errors import DomainError, ParseError
from .logreal import to_arb

FUNCTIONS = ("floor", "ceil", "sqrt", "cbrt", "log", "exp", "cos", "sin", "abs")
CONSTANTS = ("pi", "e")
MAX_EXACT_EXPONENT = 1 << 20


@dataclass(frozen=True)
class Num:
    value: Fraction


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    fn: str
    arg: object


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>\*\*|[-+*/^(),]))"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            stripped = len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[pos + stripped]!r}", pos + stripped, text)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.take()
        if val != value:
            raise ParseError(f"expected {value!r}, got {val or 'end of input'!r}", pos, self.text)

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {val!r}", pos, self.text)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val in ("-", "+"):
            self.take()
            arg = self.unary()
            return Neg(arg) if val == "-" else arg
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val in ("^", "**"):
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(Fraction(val))
        if kind == "name":
            if val == "n":
                return Var()
            if val in CONSTANTS:
                return Const(val)
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            raise ParseError(f"unknown name {val!r}", pos, self.text)
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ParseError(f"unexpected {val or 'end of input'!r}", pos, self.text)


def parse_expression(text: str):
    """Parse ``text`` into an AST; raises :class:`ParseError` with a position."""
    if not text or not text.strip():
        raise ParseError("empty expression", 0, text)
    return _Parser(text).parse()


def uses_n(node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, (Num, Const)):
        return False
    if isinstance(node, (Neg, Call)):
        return uses_n(node.arg)
    return uses_n(node.left) or uses_n(node.right)


def to_text(node) -> str:
    """Fully parenthesised rendering, re-parseable."""
    if isinstance(node, Num):
        v = node.value
        return str(v.numerator) if v.denominator == 1 else f"({v.numerator}/{v.denominator})"
    if isinstance(node, Var):
        return "n"
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_text(node.arg)})"
    if isinstance(node, Call):
        return f"{node.fn}({to_text(node.arg)})"
    return f"({to_text(node.left)}{node.op}{to_text(node.right)})"


# --- exact / ball evaluation ------------------------------------------------


class _NeedPrecision(Exception):
    pass


def _exact_root(v: Fraction, k: int) -> Fraction | None:
    """Exact k-th root of a rational, or None."""
    if v < 0:
        if k % 2 == 0:
            return None
        r = _exact_root(-v, k)
        return None if r is None else -r
    out = []
    for part in (v.numerator, v.denominator):
        r = _iroot(part, k)
        if r ** k != part:
            return None
        out.append(r)
    return Fraction(out[0], out[1])


def _iroot(x: int, k: int) -> int:
    if x < 2:
        return x
    r = int(round(x ** (1.0 / k))) if x.bit_length() < 1000 else 1 << (x.bit_length() // k)
    # Newton polish
    while True:
        nr = ((k - 1) * r + x // r ** (k - 1)) // k
        if abs(nr - r) <= 1:
            for cand in (nr - 1, nr, nr + 1, r):
                if cand >= 0 and cand ** k == x:
                    return cand
            return nr
        r = nr


def _ball(v, prec):
    return v if isinstance(v, arb) else to_arb(v, prec)


def _floor(v, prec, fn=math.floor):
    if isinstance(v, Fraction):
        return Fraction(fn(v))
    with ctx.workprec(prec):
        b = v.floor() if fn is math.floor else v.ceil()
        z = b.unique_fmpz()
    if z is None:
        raise _NeedPrecision
    return Fraction(int(z))


def _positive(v, prec, what):
    """Certain sign check; raise DomainError when certainly violated."""
    if isinstance(v, Fraction):
        if v <= 0:
            raise DomainError(f"{what} of non-positive value {v}")
        return
    if v <= 0:
        raise DomainError(f"{what} of non-positive value")
    if not v > 0:
        raise _NeedPrecision


def _eval(node, n: int, prec: int):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return Fraction(n)
    if isinstance(node, Const):
        with ctx.workprec(prec):
            return arb.pi() if node.name == "pi" else arb(1).exp()
    if isinstance(node, Neg):
        return -_eval(node.arg, n, prec)
    if isinstance(node, Call):
        return _call(node.fn, _eval(node.arg, n, prec), prec)
    left = _eval(node.left, n, prec)
    right = _eval(node.right, n, prec)
    op = node.op
    exact = isinstance(left, Fraction) and isinstance(right, Fraction)
    if op == "/":
        if (exact or isinstance(right, Fraction)) and right == 0:
            raise DomainError("division by zero")
        if isinstance(right, arb) and right.contains(0):
            if right.is_zero():
                raise DomainError("division by zero")
            raise _NeedPrecision
    if op == "^":
        return _pow(left, right, prec)
    if exact:
        if op == "+":
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        return left / right
    with ctx.workprec(prec):
        a, b = _ball(left, prec), _ball(right, prec)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        return a / b


def _pow(base, expo, prec):
    if isinstance(expo, Fraction):
        if expo.denominator == 1 and abs(expo.numerator) <= MAX_EXACT_EXPONENT:
            k = expo.numerator
            if isinstance(base, Fraction):
                if base == 0 and k < 0:
                    raise DomainError("zero to a negative power")
                return base ** k
            with ctx.workprec(prec):
                return base ** k
        if isinstance(base, Fraction) and expo.denominator <= 64:
            root = _exact_root(base, expo.denominator)
            if root is not None and abs(expo.numerator) <= MAX_EXACT_EXPONENT:
                if root == 0 and expo < 0:
                    raise DomainError("zero to a negative power")
                return root ** expo.numerator
    if isinstance(base, Fraction) and base == 0:
        if isinstance(expo, Fraction) and expo > 0:
            return Fraction(0)
        raise DomainError("zero to a non-positive power")
    _positive(base, prec, "non-integer power")
    with ctx.workprec(prec):
        return (_ball(expo, prec) * _ball(base, prec).log()).exp()


def _call(fn, v, prec):
    if fn == "floor":
        return _floor(v, prec)
    if fn == "ceil":
        return _floor(v, prec, math.ceil)
    if fn == "abs":
        if isinstance(v, Fraction):
            return abs(v)
        with ctx.workprec(prec):
            return abs(v)
    if fn in ("sqrt", "cbrt"):
        k = 2 if fn == "sqrt" else 3
        if isinstance(v, Fraction):
            r = _exact_root(v, k)
            if r is not None:
                return r
            if k == 2 and v < 0:
                raise DomainError("sqrt of negative value")
        elif k == 2:
            if v < 0:
                raise DomainError("sqrt of negative value")
            if not v >= 0:
                raise _NeedPrecision
        with ctx.workprec(prec):
            b = _ball(v, prec)
            if k == 2:
                return b.sqrt()
            if b >= 0:
                return b.root(3)
            if b < 0:
                return -((-b).root(3))
            raise _NeedPrecision
    if fn == "log":
        if isinstance(v, Fraction) and v == 1:
            return Fraction(0)
        _positive(v, prec, "log")
        with ctx.workprec(prec):
            return _ball(v, prec).log()
    if isinstance(v, Fraction) and v == 0:
        return Fraction(1) if fn in ("exp", "cos") else Fraction(0)
    with ctx.workprec(prec):
        b = _ball(v, prec)
        return {"exp": b.exp, "cos": b.cos, "sin": b.sin}[fn]()


def evaluate(node, n: int, prec: int = 256, max_prec: int | None = None, floor_result: bool = False):
    """Evaluate at integer ``n``.

    Returns a ``Fraction`` when the value is known exactly, otherwise an
    ``arb`` ball at (at least) ``prec`` bits. With ``floor_result`` the
    result is floored to an ``int``. Precision doubles while a floor or a
    sign test is undecided, up to ``max_prec`` (default ``16 * prec``).
    """
    max_prec = max_prec or max(16 * prec, 4096)
    p = prec
    while True:
        try:
            v = _eval(node, n, p)
            if floor_result:
                return int(_floor(v, p))
            return v
        except _NeedPrecision:
            if p >= max_prec:
                raise DomainError(
                    f"value at n={n} undecided at {max_prec} bits (floor or sign on an exact boundary?)"
                ) from None
            p = min(2 * p, max_prec)


# --- float64 evaluation -----------------------------------------------------

_BIG = 2.0 ** 52


def _near_integer(x):
    return np.abs(x - np.round(x)) <= 1e-9 * np.maximum(1.0, np.abs(x))


def _is_integral(node) -> bool:
    """True when every value of the subtree is an integer (given integer n)."""
    if isinstance(node, Num):
        return node.value.denominator == 1
    if isinstance(node, Var):
        return True
    if isinstance(node, Const):
        return False
    if isinstance(node, Neg):
        return _is_integral(node.arg)
    if isinstance(node, Call):
        return node.fn in ("floor", "ceil") or (node.fn == "abs" and _is_integral(node.arg))
    if node.op in ("+", "-", "*"):
        return _is_integral(node.left) and _is_integral(node.right)
    if node.op == "^":
        r = node.right
        return _is_integral(node.left) and isinstance(r, Num) and r.value.denominator == 1 and r.value >= 0
    return False


def _floor_mask(arg_vals, arg_susp, arg_integral):
    susp = arg_susp | (np.abs(arg_vals) >= _BIG) | ~np.isfinite(arg_vals)
    if not arg_integral:
        susp = susp | _near_integer(arg_vals)
    return susp


def _eval_array(node, n):
    if isinstance(node, Num):
        return np.full(n.shape, float(node.value)), np.zeros(n.shape, bool)
    if isinstance(node, Var):
        return n.astype(np.float64), n >= 2 ** 52
    if isinstance(node, Const):
        return np.full(n.shape, math.pi if node.name == "pi" else math.e), np.zeros(n.shape, bool)
    if isinstance(node, Neg):
        v, s = _eval_array(node.arg, n)
        return -v, s
    if isinstance(node, Call):
        v, s = _eval_array(node.arg, n)
        fn = node.fn
        if fn in ("floor", "ceil"):
            s = _floor_mask(v, s, _is_integral(node.arg))
            return (np.floor(v) if fn == "floor" else np.ceil(v)), s
        if fn == "cbrt":
            return np.cbrt(v), s
        if fn == "log":
            out = np.log(v)
            return out, s | ~(v > 0)
        if fn == "sqrt":
            return np.sqrt(v), s | (v < 0)
        return getattr(np, fn)(v), s
    lv, ls = _eval_array(node.left, n)
    rv, rs = _eval_array(node.right, n)
    s = ls | rs
    if node.op == "+":
        out = lv + rv
    elif node.op == "-":
        out = lv - rv
    elif node.op == "*":
        out = lv * rv
    elif node.op == "/":
        out = lv / rv
        s = s | (rv == 0)
    else:
        out = np.power(lv, rv)
        if not _is_integral(node.right):
            s = s | (lv <= 0)
    if _is_integral(node):
        s = s | (np.abs(out) >= _BIG)
    return out, s


def evaluate_array(node, n, floor_result: bool = False):
    """Vectorised float64 evaluation over an integer array ``n``.

    Returns ``(values, suspect)``: ``suspect[i]`` marks entries whose float
    value may be wrong (undecided floors, overflow, domain trouble).
    """
    n = np.asarray(n, dtype=np.int64)
    with np.errstate(all="ignore"):
        v, s = _eval_array(node, n)
        if floor_result:
            s = _floor_mask(v, s, _is_integral(node))
            v = np.floor(v)
        s = s | ~np.isfinite(v)
    return v, s
