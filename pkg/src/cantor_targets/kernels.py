"""Float64 hot loops over the cumulative sequences.

Every kernel exists twice: a loop version compiled with numba and a
vectorised numpy version. Arrays are 0-based with slot ``i`` holding the
value for ``n = i + 1``; window bounds ``lo``/``hi`` are 1-based and
inclusive.

The loop versions are the reference for accuracy (compensated summation);
the numpy versions use extended precision where numpy offers it.
"""
import numpy as np

from . import _accel
from ._accel import njit

__all__ = [
    "BACKEND",
    "prefix_sum",
    "ratio_window",
    "pressure_window",
    "pressure_root",
    "pressure_profile",
]


# --- numba loops -----------------------------------------------------------


@njit
def _prefix_sum_nb(x):
    out = np.empty(x.shape[0], dtype=np.float64)
    s = 0.0
    c = 0.0
    for i in range(x.shape[0]):
        v = x[i]
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
        out[i] = s + c
    return out


@njit
def _ratio_window_nb(logq, alpha, lo, hi):
    half = lo + (hi - lo + 1) // 2
    best = -1.0
    best_n = lo
    best_upper = -1.0
    for n in range(lo, hi + 1):
        lq = logq[n - 1]
        g = lq / (lq + alpha[n - 1])
        if g > best:
            best = g
            best_n = n
        if n >= half and g > best_upper:
            best_upper = g
    return best, best_n, best_upper


@njit
def _pressure_window_nb(logq, alpha, s, lo, hi):
    best = -np.inf
    best_n = lo
    for n in range(lo, hi + 1):
        f = ((1.0 - s) * logq[n - 1] - s * alpha[n - 1]) / n
        if f > best:
            best = f
            best_n = n
    return best, best_n


@njit
def _pressure_root_nb(logq, alpha, lo, hi, tol, max_iter):
    a = 0.0
    b = 1.0
    it = 0
    while b - a >= tol and it < max_iter:
        m = 0.5 * (a + b)
        best = -np.inf
        for n in range(lo, hi + 1):
            f = ((1.0 - m) * logq[n - 1] - m * alpha[n - 1]) / n
            if f > best:
                best = f
                if best > 0.0:
                    break
        if best > 0.0:
            a = m
        else:
            b = m
        it += 1
    return 0.5 * (a + b), it


@njit
def _pressure_profile_nb(logq, alpha, s, lo, hi):
    out = np.empty(hi - lo + 1, dtype=np.float64)
    for n in range(lo, hi + 1):
        out[n - lo] = ((1.0 - s) * logq[n - 1] - s * alpha[n - 1]) / n
    return out


# --- numpy equivalents -----------------------------------------------------


def _prefix_sum_np(x):
    return np.cumsum(np.asarray(x, dtype=np.longdouble)).astype(np.float64)


def _ratio_window_np(logq, alpha, lo, hi):
    lq = logq[lo - 1 : hi]
    g = lq / (lq + alpha[lo - 1 : hi])
    i = int(np.argmax(g))
    half = (hi - lo + 1) // 2
    return float(g[i]), lo + i, float(g[half:].max())


def _pressure_window_np(logq, alpha, s, lo, hi):
    f = _pressure_profile_np(logq, alpha, s, lo, hi)
    i = int(np.argmax(f))
    return float(f[i]), lo + i


def _pressure_root_np(logq, alpha, lo, hi, tol, max_iter):
    lq = logq[lo - 1 : hi]
    al = alpha[lo - 1 : hi]
    inv_n = 1.0 / np.arange(lo, hi + 1, dtype=np.float64)
    a, b, it = 0.0, 1.0, 0
    while b - a >= tol and it < max_iter:
        m = 0.5 * (a + b)
        if np.max(((1.0 - m) * lq - m * al) * inv_n) > 0.0:
            a = m
        else:
            b = m
        it += 1
    return 0.5 * (a + b), it


def _pressure_profile_np(logq, alpha, s, lo, hi):
    n = np.arange(lo, hi + 1, dtype=np.float64)
    return ((1.0 - s) * logq[lo - 1 : hi] - s * alpha[lo - 1 : hi]) / n


# --- dispatch ----------------------------------------------------------------

NUMBA = {
    "prefix_sum": _prefix_sum_nb,
    "ratio_window": _ratio_window_nb,
    "pressure_window": _pressure_window_nb,
    "pressure_root": _pressure_root_nb,
    "pressure_profile": _pressure_profile_nb,
}
NUMPY = {
    "prefix_sum": _prefix_sum_np,
    "ratio_window": _ratio_window_np,
    "pressure_window": _pressure_window_np,
    "pressure_root": _pressure_root_np,
    "pressure_profile": _pressure_profile_np,
}

BACKEND = "numba" if _accel.USE_NUMBA else "numpy"
_impl = NUMBA if _accel.USE_NUMBA else NUMPY


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def prefix_sum(x):
    """Cumulative sum ``out[i] = x[0] + ... + x[i]``."""
    return _impl["prefix_sum"](_f64(x))


def ratio_window(logq, alpha, lo, hi):
    """Max of ``logQ_n / (logQ_n + alpha(n))`` over ``[lo, hi]``.

    Returns ``(max, argmax_n, max_over_upper_half)``.
    """
    v, n, upper = _impl["ratio_window"](_f64(logq), _f64(alpha), int(lo), int(hi))
    return float(v), int(n), float(upper)


def pressure_window(logq, alpha, s, lo, hi):
    """Max over ``[lo, hi]`` of ``((1-s) logQ_n - s alpha(n)) / n``, with argmax."""
    v, n = _impl["pressure_window"](_f64(logq), _f64(alpha), float(s), int(lo), int(hi))
    return float(v), int(n)


def pressure_root(logq, alpha, lo, hi, tol=1e-6, max_iter=60):
    """Bisection on [0, 1] for the sign change of the windowed pressure."""
    v, it = _impl["pressure_root"](
        _f64(logq), _f64(alpha), int(lo), int(hi), float(tol), int(max_iter)
    )
    return float(v), int(it)


def pressure_profile(logq, alpha, s, lo, hi):
    return _impl["pressure_profile"](_f64(logq), _f64(alpha), float(s), int(lo), int(hi))
