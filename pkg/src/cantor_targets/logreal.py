"""Rigorous high-precision reals for log-domain bookkeeping.

A :class:`LogReal` is a midpoint-radius ball (backed by arb from
python-flint) plus the working precision it was produced at. Arithmetic
propagates the radius, so every comparison can answer "don't know"
instead of guessing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from flint import arb, ctx, fmpq, fmpz

DEFAULT_PREC = 256


def to_arb(value, prec: int) -> arb:
    """Ball enclosing ``value`` (int, Fraction, fmpq, str, float or arb) at ``prec`` bits."""
    with ctx.workprec(prec):
        if isinstance(value, arb):
            return +value
        if isinstance(value, Fraction):
            return arb(fmpq(value.numerator, value.denominator))
        if isinstance(value, int):
            return arb(fmpz(value))
        return arb(value)


@dataclass(frozen=True)
class LogReal:
    ball: arb
    prec: int = DEFAULT_PREC

    @classmethod
    def of(cls, value, prec: int = DEFAULT_PREC) -> LogReal:
        return cls(to_arb(value, prec), prec)

    @classmethod
    def log_of(cls, value, prec: int = DEFAULT_PREC) -> LogReal:
        """Natural log of a positive exact value."""
        with ctx.workprec(prec):
            b = to_arb(value, prec)
            if not b > 0:
                raise ValueError(f"log of non-positive value {value!r}")
            return cls(b.log(), prec)

    @property
    def mid(self) -> float:
        return float(self.ball.mid())

    @property
    def radius(self) -> float:
        return float(self.ball.rad())

    @property
    def lower(self) -> float:
        return float(self.ball.lower())

    @property
    def upper(self) -> float:
        return float(self.ball.upper())

    @property
    def is_exact(self) -> bool:
        return self.ball.is_exact()

    def sign(self) -> int | None:
        """+1, -1 or 0 when certain; ``None`` when the ball straddles zero."""
        b = self.ball
        if b.is_zero():
            return 0
        if b > 0:
            return 1
        if b < 0:
            return -1
        return None

    def _prec_with(self, other) -> int:
        return max(self.prec, other.prec) if isinstance(other, LogReal) else self.prec

    def _coerce(self, other, prec):
        return other.ball if isinstance(other, LogReal) else to_arb(other, prec)

    def __add__(self, other) -> LogReal:
        p = self._prec_with(other)
        with ctx.workprec(p):
            return LogReal(self.ball + self._coerce(other, p), p)

    __radd__ = __add__

    def __sub__(self, other) -> LogReal:
        p = self._prec_with(other)
        with ctx.workprec(p):
            return LogReal(self.ball - self._coerce(other, p), p)

    def __rsub__(self, other) -> LogReal:
        p = self._prec_with(other)
        with ctx.workprec(p):
            return LogReal(self._coerce(other, p) - self.ball, p)

    def __mul__(self, other) -> LogReal:
        p = self._prec_with(other)
        with ctx.workprec(p):
            return LogReal(self.ball * self._coerce(other, p), p)

    __rmul__ = __mul__

    def __truediv__(self, other) -> LogReal:
        p = self._prec_with(other)
        with ctx.workprec(p):
            return LogReal(self.ball / self._coerce(other, p), p)

    def __neg__(self) -> LogReal:
        with ctx.workprec(self.prec):
            return LogReal(-self.ball, self.prec)

    def exp(self) -> LogReal:
        with ctx.workprec(self.prec):
            return LogReal(self.ball.exp(), self.prec)

    def contains(self, value) -> bool:
        return self.ball.contains(to_arb(value, self.prec))

    def overlaps(self, other) -> bool:
        return self.ball.overlaps(other.ball if isinstance(other, LogReal) else to_arb(other, self.prec))

    def __float__(self) -> float:
        return self.mid

    def __repr__(self) -> str:
        return f"LogReal({self.mid!r} +/- {self.radius:.3g}, prec={self.prec})"

    def to_str(self, digits: int = 17) -> str:
        """Decimal midpoint with ``digits`` significant digits."""
        with ctx.workprec(self.prec):
            mid = self.ball.mid()
            if mid.is_zero():
                return "0"
            if not mid.is_finite():
                return str(float(mid))
            s = mid.str(digits, radius=False)
        return s.strip("[]")


def sign_at_increasing_precision(build, start_prec: int, max_prec: int) -> tuple[int | None, LogReal]:
    """Evaluate ``build(prec) -> LogReal`` at doubling precision until its sign is certain."""
    prec = start_prec
    while True:
        value = build(prec)
        sgn = value.sign()
        if sgn is not None or prec >= max_prec:
            return sgn, value
        prec = min(2 * prec, max_prec)


def log2_of_int(value: int) -> float:
    """Float log2 of a (possibly huge) positive integer."""
    if value <= 0:
        raise ValueError("positive integer required")
    bits = value.bit_length()
    if bits < 1000:
        return math.log2(value)
    shift = bits - 60
    return math.log2(value >> shift) + shift
