"""Time the numba kernels against their numpy fallbacks.

Usage: python3 benchmarks/bench_kernels.py [--sizes 10000,100000,1000000] [--repeat 5]

Both backends are imported in one process (the env flag only picks the
default), so the same inputs go through each implementation. Results of
the two backends are compared before timing.
"""
import argparse
import time

import numpy as np

from cantor_targets import kernels
from cantor_targets._accel import HAVE_NUMBA


def inputs(N: int):
    n = np.arange(1, N + 1, dtype=np.float64)
    logq = kernels.NUMPY["prefix_sum"](np.log(n + 1.0))
    alpha = kernels.NUMPY["prefix_sum"](np.log(n))
    return logq, alpha


CASES = {
    "prefix_sum": lambda lq, a, N: (np.log(np.arange(2, N + 2, dtype=np.float64)),),
    "ratio_window": lambda lq, a, N: (lq, a, N // 2, N),
    "pressure_window": lambda lq, a, N: (lq, a, 0.3, N // 2, N),
    "pressure_root": lambda lq, a, N: (lq, a, N // 2, N, 1e-9, 60),
    "pressure_profile": lambda lq, a, N: (lq, a, 0.3, N // 2, N),
}


def best_of(fn, args, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t)
    return best


def close(x, y) -> bool:
    return all(np.allclose(np.asarray(u, dtype=float), np.asarray(v, dtype=float), rtol=1e-9, atol=0)
               for u, v in zip(x if isinstance(x, tuple) else (x,), y if isinstance(y, tuple) else (y,)))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="10000,100000,1000000")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'kernel':<18}{'N':>10}{'numpy [ms]':>14}{'numba [ms]':>14}{'speedup':>10}  agree")
    for N in (int(s) for s in args.sizes.split(",")):
        lq, a = inputs(N)
        for name, make in CASES.items():
            call_args = make(lq, a, N)
            fast, slow = kernels.NUMBA[name], kernels.NUMPY[name]
            agree = close(fast(*call_args), slow(*call_args))  # also triggers compilation
            t_np = best_of(slow, call_args, args.repeat)
            t_nb = best_of(fast, call_args, args.repeat)
            print(f"{name:<18}{N:>10}{1e3 * t_np:>14.3f}{1e3 * t_nb:>14.3f}{t_np / t_nb:>10.1f}  {agree}")


if __name__ == "__main__":
    main()
