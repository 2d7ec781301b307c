"""Shrinking targets around the Q-adic grid and membership tests.

Level ``n`` consists of the arcs ``{x : ||x - j/Q_n|| <= exp(-alpha(n))/Q_n}``
for ``j = 0..Q_n-1``. A point is hit at level ``n`` when
``||T_Q^n(x)|| <= exp(-alpha(n))``; the same event seen from the
Diophantine side is ``|x - j/Q_n| <= psi(n)`` for the nearest grid point.

Rational distances are compared with transcendental radii in ball
arithmetic, so a verdict can be :attr:`Verdict.UNCERTAIN`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

from flint import arb, ctx

from .errors import NotQAdic
from .expansion import iterate, nearest_integer_distance, nearest_qadic, to_point
from .logreal import LogReal, sign_at_increasing_precision, to_arb
from .sequences import BASE, WEIGHT, CumulativeCache, as_cache

DEFAULT_PRECISION = 128
MAX_PRECISION = 1024
DEFAULT_SCAN = 10_000


class Verdict(str, enum.Enum):
    HIT = "hit"
    MISS = "miss"
    UNCERTAIN = "uncertain"


@dataclass(frozen=True)
class TargetLevel:
    n: int
    log_Qn: LogReal
    alpha_n: LogReal
    log_radius: LogReal

    @property
    def disjoint(self) -> bool | None:
        """Whether the Q_n arcs are pairwise disjoint (radius < 1/(2 Q_n)).

        Equivalent to ``alpha(n) > log 2``; ``None`` if undecided.
        """
        with ctx.workprec(self.alpha_n.prec):
            gap = self.alpha_n.ball - arb(2).log()
        return True if gap > 0 else False if gap <= 0 else None


@dataclass(frozen=True)
class HitVerdict:
    status: Verdict
    margin: LogReal
    n: int
    precision: int

    @property
    def hit(self) -> bool:
        return self.status is Verdict.HIT


@dataclass(frozen=True)
class WitnessResult:
    status: Verdict
    n: int
    index: int
    distance: Fraction
    witness: Fraction | None = None
    height: int | None = None

    @property
    def found(self) -> bool | None:
        if self.status is Verdict.UNCERTAIN:
            return None
        return self.status is Verdict.HIT


def _caches(Q, alpha) -> tuple[CumulativeCache, CumulativeCache]:
    return as_cache(Q, BASE), as_cache(alpha, WEIGHT)


def make_level(Q, alpha, n: int, prec: int | None = None) -> TargetLevel:
    """Level-``n`` target data in the log domain; never needs the exact ``Q_n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    Q, alpha = _caches(Q, alpha)
    prec = prec or Q.prec
    log_q = Q.at_precision(prec).log_partial_product(n)
    a = alpha.at_precision(prec).alpha_partial_sum(n)
    return TargetLevel(n, log_q, a, -(a + log_q))


def psi(Q, alpha, n: int, prec: int | None = None) -> LogReal:
    """``log psi(n) = -alpha(n) - log Q_n``."""
    return make_level(Q, alpha, n, prec).log_radius


def _verdict(dist: Fraction, alpha: CumulativeCache, n: int, precision: int, max_precision: int,
             scale: int | None = None) -> tuple[Verdict, LogReal, int]:
    """Compare ``dist <= exp(-alpha(n)) / scale`` (``scale`` = Q_n, or 1 when omitted)."""
    if dist == 0:
        return Verdict.HIT, LogReal(arb.neg_inf(), precision), precision

    def margin(p):
        with ctx.workprec(p):
            m = to_arb(dist, p).log() + alpha.at_precision(p).alpha_partial_sum(n).ball
            if scale is not None:
                m = m + to_arb(scale, p).log()
        return LogReal(m, p)

    sgn, m = sign_at_increasing_precision(margin, precision, max_precision)
    if sgn is None:
        return Verdict.UNCERTAIN, m, m.prec
    return (Verdict.HIT if sgn <= 0 else Verdict.MISS), m, m.prec


def hit_test(x, Q, alpha, n: int, precision: int = DEFAULT_PRECISION,
             max_precision: int = MAX_PRECISION) -> HitVerdict:
    """Is ``||T_Q^n(x)|| <= exp(-alpha(n))``?

    The margin is ``log||T_Q^n x|| + alpha(n)`` (negative means hit).
    Precision doubles from ``precision`` up to ``max_precision`` while the
    sign is undecided.
    """
    Q, alpha = _caches(Q, alpha)
    d = nearest_integer_distance(iterate(x, Q, n))
    status, margin, p = _verdict(d, alpha, n, precision, max_precision)
    return HitVerdict(status, margin, n, p)


def hit_levels(x, Q, alpha, N: int, precision: int = DEFAULT_PRECISION,
               max_precision: int = MAX_PRECISION) -> list[tuple[int, HitVerdict]]:
    """All levels ``n <= N`` that are hits or undecided, in increasing order."""
    if N < 1:
        raise ValueError("N must be >= 1")
    Q, alpha = _caches(Q, alpha)
    y = to_point(x)
    out = []
    for n in range(1, N + 1):
        y = y * Q.term(n)
        y -= math.floor(y)
        status, margin, p = _verdict(nearest_integer_distance(y), alpha, n, precision, max_precision)
        if status is not Verdict.MISS:
            out.append((n, HitVerdict(status, margin, n, p)))
    return out


def _structured_horizon(Q: CumulativeCache) -> int | None:
    spec = Q.spec
    if spec.kind in ("const", "periodic", "eventually"):
        return len(spec.preperiod) + len(spec.period)
    return None


def height(w, Q, n_scan: int = DEFAULT_SCAN) -> int:
    """Least ``n >= 1`` with ``w * Q_n`` an integer.

    Raises :class:`NotQAdic` when the denominator never divides ``Q_n``:
    definitively for const/periodic/eventually sequences, otherwise
    "within the scan horizon" of ``n_scan`` terms.
    """
    Q = as_cache(Q, BASE)
    w = to_point(w)
    r = w.denominator
    if r == 1:
        return 1
    spec = Q.spec
    limit = n_scan
    if spec.kind == "table":
        limit = min(limit, len(spec.preperiod))
    period = _structured_horizon(Q)
    stalled_since = None
    for n in range(1, limit + 1):
        g = math.gcd(r, Q.term(n))
        if g > 1:
            r //= g
            stalled_since = None
            if r == 1:
                return n
        elif period is not None:
            stalled_since = stalled_since or n
            if n >= len(spec.preperiod) and n - stalled_since + 1 >= len(spec.period):
                raise NotQAdic(f"{w} is not a Q-adic rational for Q = {spec.text}")
    raise NotQAdic(f"{w} is not Q-adic within the scan horizon n <= {limit} for Q = {spec.text}")


def witness_search(x, Q, alpha, n: int, precision: int = DEFAULT_PRECISION,
                   max_precision: int = MAX_PRECISION) -> WitnessResult:
    """Nearest order-``n`` grid point ``w = j/Q_n``, kept if ``|x - w| <= psi(n)``.

    Works from the exact grid distance and the exact ``Q_n`` (so it needs
    ``Q_n`` within the cap), independently of the orbit used by
    :func:`hit_test`.
    """
    Q, alpha = _caches(Q, alpha)
    j, dist = nearest_qadic(x, Q, n)
    Qn = Q.partial_product(n)
    status, _, _ = _verdict(dist, alpha, n, precision, max_precision, scale=Qn)
    if status is Verdict.HIT:
        w = Fraction(j, Qn)
        return WitnessResult(status, n, j, dist, w, height(w, Q, n_scan=n))
    return WitnessResult(status, n, j, dist)
