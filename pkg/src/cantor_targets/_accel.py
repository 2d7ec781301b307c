"""numba shim.

Set ``CANTOR_TARGETS_NUMBA=0`` to force the pure-numpy kernels. When numba
is missing the flag is ignored and numpy is used.
"""
import os

_flag = os.environ.get("CANTOR_TARGETS_NUMBA", "1").strip().lower()
_wanted = _flag not in ("0", "false", "no", "off")

try:
    from numba import njit as _numba_njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via monkeypatched sys.modules
    _numba_njit = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _wanted


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return _numba_njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(fn):
        return fn

    return wrap
