"""Pressure function, Bowen parameter and the closed-form dimension.

For a base sequence Q and weights alpha the level-n pressure approximant is

    f_n(s) = ((1 - s) log Q_n - s alpha(n)) / n,

and its sign change sits at g_n = log Q_n / (log Q_n + alpha(n)). Limsups
are replaced by the maximum over a tail window ``[ceil(w N), N]``; the
residual compares that maximum with the maximum over the upper half of
the window, so slow convergence shows up as a large residual rather
than a silently wrong number.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from flint import arb, ctx

from . import expr as ex
from . import kernels
from .errors import PreconditionUnmet, UnsupportedFamily
from .logreal import LogReal, to_arb
from .sequences import BASE, WEIGHT, as_cache

DEFAULT_WINDOW = 0.5
DEFAULT_TOL = 1e-6
MAX_BISECTIONS = 60
NO_LIMIT_THRESHOLD = 1e-3
DIVERGENCE_SLOPE = 0.5


@dataclass(frozen=True)
class PressureProfile:
    s: float
    window: tuple[int, int]
    n: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def samples(self) -> dict[int, float]:
        return dict(zip(self.n.tolist(), self.values.tolist()))


@dataclass(frozen=True)
class DimensionEstimate:
    value: float
    method: str
    window: tuple[int, int]
    residual: float
    argmax: int | None = None
    iterations: int | None = None
    limit_ratio: float | None = None
    no_limit: bool = False

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "method": self.method,
            "window": list(self.window),
            "residual": self.residual,
            "argmax": self.argmax,
            "iterations": self.iterations,
            "limit_ratio": self.limit_ratio,
            "no_limit": self.no_limit,
        }


def tail_window(N_hi: int, window_fraction: float = DEFAULT_WINDOW) -> tuple[int, int]:
    if N_hi < 10:
        raise ValueError(f"N_hi must be >= 10, got {N_hi}")
    if not 0 < window_fraction < 1:
        raise ValueError(f"window fraction must lie in (0, 1), got {window_fraction}")
    return max(1, math.ceil(window_fraction * N_hi)), N_hi


def _upper_half(lo: int, hi: int) -> int:
    return lo + (hi - lo + 1) // 2


def cumulative_arrays(Q, alpha, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Float64 ``log Q_n`` and ``alpha(n)`` for n = 1..N."""
    Q, alpha = as_cache(Q, BASE), as_cache(alpha, WEIGHT)
    return Q.float_prefix(N), alpha.float_prefix(N)


def pressure_estimate(Q, alpha, s: float, N_hi: int = 1000,
                      window_fraction: float = DEFAULT_WINDOW) -> tuple[float, PressureProfile]:
    """Windowed surrogate for the upper pressure at ``s``: ``max f_n(s)`` over the tail."""
    if not 0 <= s <= 1:
        raise ValueError(f"s must lie in [0, 1], got {s}")
    lo, hi = tail_window(N_hi, window_fraction)
    logq, a = cumulative_arrays(Q, alpha, hi)
    values = kernels.pressure_profile(logq, a, s, lo, hi)
    best, _ = kernels.pressure_window(logq, a, s, lo, hi)
    return best, PressureProfile(float(s), (lo, hi), np.arange(lo, hi + 1), values)


def bowen_parameter(Q, alpha, N_hi: int = 1000, tol: float = DEFAULT_TOL,
                    window_fraction: float = DEFAULT_WINDOW, max_iter: int = MAX_BISECTIONS) -> DimensionEstimate:
    """Bisection on [0, 1] for the sign change of the windowed pressure.

    Valid because every ``f_n`` is strictly decreasing in ``s`` and
    ``f_n(0) >= log 2 > 0``. The residual is the shift of the root when the
    window is cut to its upper half.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo, hi = tail_window(N_hi, window_fraction)
    logq, a = cumulative_arrays(Q, alpha, hi)
    root, it = kernels.pressure_root(logq, a, lo, hi, tol, max_iter)
    root_upper, _ = kernels.pressure_root(logq, a, _upper_half(lo, hi), hi, tol, max_iter)
    return DimensionEstimate(root, "bowen_bisection", (lo, hi), abs(root - root_upper), iterations=it)


def dimension_limsup(Q, alpha, N_hi: int = 1000, window_fraction: float = DEFAULT_WINDOW) -> DimensionEstimate:
    """Tail-window maximum of ``log Q_n / (log Q_n + alpha(n))``."""
    lo, hi = tail_window(N_hi, window_fraction)
    logq, a = cumulative_arrays(Q, alpha, hi)
    best, n_best, upper = kernels.ratio_window(logq, a, lo, hi)
    return DimensionEstimate(best, "closed_form_limsup", (lo, hi), abs(best - upper), argmax=n_best)


def ratio_profile(Q, alpha, N_hi: int, window_fraction: float = DEFAULT_WINDOW) -> PressureProfile:
    """The g_n samples behind :func:`dimension_limsup`, in profile form (``s`` is NaN)."""
    lo, hi = tail_window(N_hi, window_fraction)
    logq, a = cumulative_arrays(Q, alpha, hi)
    g = logq[lo - 1 : hi] / (logq[lo - 1 : hi] + a[lo - 1 : hi])
    return PressureProfile(float("nan"), (lo, hi), np.arange(lo, hi + 1), g)


def corollary_limit(Q, alpha, N_hi: int = 1000, window_fraction: float = DEFAULT_WINDOW,
                    threshold: float = NO_LIMIT_THRESHOLD) -> DimensionEstimate:
    """``1 / (1 + L)`` with ``L`` the tail mean of ``alpha_n / log q_n``.

    A ratio growing like a positive power of n is read as ``L = inf``
    (value 0). Otherwise the residual is the spread of ``1/(1 + ratio_n)``
    over the window and ``no_limit`` is set when it exceeds ``threshold``.
    """
    Q, alpha = as_cache(Q, BASE), as_cache(alpha, WEIGHT)
    lo, hi = tail_window(N_hi, window_fraction)
    ratio = alpha.float_terms(hi)[lo - 1 :] / Q.float_terms(hi)[lo - 1 :]
    dims = 1.0 / (1.0 + ratio)
    spread = float(dims.max() - dims.min())
    half = (hi - lo + 1) // 2
    r_lower, r_upper = float(ratio[:half].mean()), float(ratio[half:].mean())
    if r_lower > 0 and r_upper > r_lower:
        n_lower = math.sqrt(lo * (lo + half - 1))
        n_upper = math.sqrt((lo + half) * hi)
        slope = math.log(r_upper / r_lower) / math.log(n_upper / n_lower)
        if slope >= DIVERGENCE_SLOPE:
            return DimensionEstimate(0.0, "corollary_limit", (lo, hi), spread, limit_ratio=math.inf)
    L = float(ratio.mean())
    return DimensionEstimate(1.0 / (1.0 + L), "corollary_limit", (lo, hi), spread,
                             limit_ratio=L, no_limit=spread > threshold)


# --- closed-form families ------------------------------------------------------


@dataclass(frozen=True)
class PeriodicFamily:
    """Eventually periodic Q (the preperiod is irrelevant) with alpha_n = c."""

    period: tuple
    c: object
    preperiod: tuple = ()


@dataclass(frozen=True)
class PolynomialFamily:
    """q_n ~ n^k with alpha_n = c log n."""

    k: object
    c: object


@dataclass(frozen=True)
class ExponentialFamily:
    """q_n ~ b^n with alpha_n = c n."""

    b: object
    c: object


@dataclass(frozen=True)
class FamilyValue:
    value: LogReal
    expression: str

    def __float__(self) -> float:
        return self.value.mid


def _param(value, prec):
    if isinstance(value, str):
        value = ex.evaluate(ex.parse_expression(value), 1, prec)
    return to_arb(value, prec)


def family_formula(family, prec: int = 256) -> FamilyValue:
    """Exact closed-form dimension for the three standard families."""
    with ctx.workprec(prec):
        c = _param(family.c, prec)
        if c < 0:
            raise UnsupportedFamily("c must be >= 0")
        if isinstance(family, PeriodicFamily):
            if not family.period or any(int(p) != p or p < 2 for p in family.period):
                raise UnsupportedFamily("period entries must be integers >= 2")
            m = len(family.period)
            log_g = arb(math.prod(int(p) for p in family.period)).log() / m
            return FamilyValue(LogReal(log_g / (log_g + c), prec), "log(G)/(log(G)+c), G = geometric mean of the period")
        if isinstance(family, PolynomialFamily):
            k = _param(family.k, prec)
            if not k > 0:
                raise UnsupportedFamily("k must be > 0")
            return FamilyValue(LogReal(k / (k + c), prec), "k/(k+c)")
        if isinstance(family, ExponentialFamily):
            b = _param(family.b, prec)
            if not b > 1:
                raise UnsupportedFamily("b must be > 1")
            lb = b.log()
            return FamilyValue(LogReal(lb / (lb + c), prec), "log(b)/(log(b)+c)")
    raise UnsupportedFamily(f"unsupported family descriptor {family!r}")


def parse_family(text: str):
    """``periodic:2,3;c=1``, ``eventually:5|2,3;c=1``, ``poly:k=1/6;c=1``, ``exp:b=2;c=log(2)``."""
    head, _, rest = text.partition(";")
    kind, _, payload = head.partition(":")
    params = {}
    for item in filter(None, (p.strip() for p in rest.split(";"))):
        key, sep, val = item.partition("=")
        if not sep:
            raise UnsupportedFamily(f"expected key=value, got {item!r}")
        params[key.strip()] = val.strip()
    for key, val in list(params.items()):
        value = ex.evaluate(ex.parse_expression(val), 1)
        params[key] = value if isinstance(value, Fraction) else val
    if kind in ("poly", "exp") and ":" in head and "=" in payload:
        key, _, val = payload.partition("=")
        value = ex.evaluate(ex.parse_expression(val), 1)
        params[key.strip()] = value if isinstance(value, Fraction) else val
    if "c" not in params:
        raise UnsupportedFamily("family needs c=<value>")
    try:
        if kind == "periodic":
            return PeriodicFamily(tuple(int(Fraction(p)) for p in payload.split(",")), params["c"])
        if kind == "eventually":
            pre, _, per = payload.partition("|")
            return PeriodicFamily(
                tuple(int(Fraction(p)) for p in per.split(",")),
                params["c"],
                tuple(int(Fraction(p)) for p in pre.split(",") if p.strip()),
            )
        if kind == "poly":
            return PolynomialFamily(params["k"], params["c"])
        if kind == "exp":
            return ExponentialFamily(params["b"], params["c"])
    except (KeyError, ValueError) as err:
        raise UnsupportedFamily(f"bad family descriptor {text!r}: {err}") from None
    raise UnsupportedFamily(f"unknown family kind {kind!r}; expected periodic, eventually, poly or exp")


# --- Stolz-Cesaro diagnostic ------------------------------------------------------


@dataclass(frozen=True)
class StolzReport:
    N: int
    term_ratio: float
    term_ratio_min: float
    term_ratio_max: float
    sum_ratio: float
    gap: float
    b_sum: float
    term_ratio_growing: bool

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def stolz_check(a, b, N_hi: int = 1000, window_fraction: float = DEFAULT_WINDOW) -> StolzReport:
    """Compare ``a_n / b_n`` on the tail with ``(a_1+..+a_n)/(b_1+..+b_n)`` at ``N_hi``."""
    a, b = as_cache(a, WEIGHT), as_cache(b, WEIGHT)
    lo, hi = tail_window(N_hi, window_fraction)
    bt = b.float_terms(hi)
    if (bt <= 0).any():
        raise PreconditionUnmet("b must have positive terms")
    at = a.float_terms(hi)
    ratio = at[lo - 1 :] / bt[lo - 1 :]
    sa, sb = a.float_prefix(hi)[-1], b.float_prefix(hi)[-1]
    half = (hi - lo + 1) // 2
    growing = bool(ratio[half:].min() > ratio[:half].max())
    term_ratio = float(ratio[-1])
    sum_ratio = float(sa / sb)
    return StolzReport(hi, term_ratio, float(ratio.min()), float(ratio.max()), sum_ratio,
                       abs(term_ratio - sum_ratio), float(sb), growing)
