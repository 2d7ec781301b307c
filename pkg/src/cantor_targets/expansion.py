"""Exact Q-Cantor series digits and the maps x -> q_n x (mod 1) on rationals.

Points of the circle R/Z are plain :class:`fractions.Fraction` values
reduced into [0, 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import InvalidDigit
from .sequences import BASE, CumulativeCache, as_cache


def to_point(value) -> Fraction:
    """Exact representative in [0, 1) of ``value`` mod 1.

    Strings may be ``"p/q"`` or decimal literals; decimals are converted
    exactly (``"0.2"`` is 1/5, not the nearest double).
    """
    if isinstance(value, str):
        text = value.strip()
        try:
            value = Fraction(text)
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"not a rational or decimal literal: {text!r}") from None
    elif isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError("point must be finite")
        value = Fraction(value)
    else:
        value = Fraction(value)
    return value - math.floor(value)


@dataclass(frozen=True)
class DigitString:
    digits: tuple
    remainder: Fraction

    def __len__(self) -> int:
        return len(self.digits)


def iterate(x, Q, n: int, start: int = 0) -> Fraction:
    """``T_{Q,start+n} o ... o T_{Q,start+1}(x)``, i.e. frac(q_{start+1} ... q_{start+n} x).

    Exact for every rational ``x``; only ``Q_n mod denominator(x)`` is
    needed, so no size cap applies.
    """
    if n < 0 or start < 0:
        raise ValueError("n and start must be >= 0")
    x = to_point(x)
    Q = as_cache(Q, BASE)
    p, q = x.numerator, x.denominator
    if q == 1:
        return Fraction(0)
    if start == 0:
        r = Q.product_mod(n, q)
    else:
        r = 1
        for k in range(start + 1, start + n + 1):
            r = r * Q.term(k) % q
    return Fraction(r * p % q, q)


def cantor_digits(x, Q, n: int) -> DigitString:
    """First ``n`` digits ``w_k = floor(q_k T^{k-1}(x))`` and the remainder ``T^n(x)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    Q = as_cache(Q, BASE)
    y = to_point(x)
    digits = []
    for k in range(1, n + 1):
        y = y * Q.term(k)
        w = math.floor(y)
        digits.append(w)
        y -= w
    return DigitString(tuple(digits), y)


def reconstruct(digits, Q) -> Fraction:
    """``sum_j w_j / Q_j``; raises :class:`InvalidDigit` unless ``0 <= w_j < q_j``."""
    Q = as_cache(Q, BASE)
    if isinstance(digits, DigitString):
        digits = digits.digits
    total = Fraction(0)
    for j, w in enumerate(digits, 1):
        qj = Q.term(j)
        if not 0 <= w < qj:
            raise InvalidDigit(f"digit {j} is {w}, must lie in 0..{qj - 1}")
        if w:
            total += Fraction(w, Q.partial_product(j))
    return total


def expansion_value(ds: DigitString, Q) -> Fraction:
    """The point a digit string describes: digits plus remainder scaled by ``1/Q_n``."""
    Q = as_cache(Q, BASE)
    return reconstruct(ds.digits, Q) + ds.remainder / Q.partial_product(len(ds.digits))


def nearest_integer_distance(y) -> Fraction:
    y = Fraction(y)
    f = y - math.floor(y)
    return min(f, 1 - f)


def circle_distance(a, b) -> Fraction:
    return nearest_integer_distance(Fraction(a) - Fraction(b))


def nearest_qadic(x, Q, n: int) -> tuple[int, Fraction]:
    """Grid index ``j`` in ``0..Q_n-1`` closest to ``x`` on the circle, and the distance.

    Ties go to the smaller index. Needs the exact ``Q_n``.
    """
    Q = as_cache(Q, BASE)
    x = to_point(x)
    Qn = Q.partial_product(n)
    k = math.floor(x * Qn)
    best = None
    for j in {k % Qn, (k + 1) % Qn}:
        d = circle_distance(x, Fraction(j, Qn))
        if best is None or (d, j) < best:
            best = (d, j)
    return best[1], best[0]


__all__ = [
    "CumulativeCache",
    "DigitString",
    "cantor_digits",
    "circle_distance",
    "expansion_value",
    "iterate",
    "nearest_integer_distance",
    "nearest_qadic",
    "reconstruct",
    "to_point",
]
