"""Time the numba kernels against their numpy fallbacks.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--size 400]

Each numba kernel is called once before timing so compilation is excluded.
Outputs of the two backends are compared and the largest difference printed.
"""

import argparse
import time

import numpy as np

from sosminmax import _accel


def best_time(fn, args, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def cases(size, rng):
    X = rng.random((size, 2))
    Y = rng.random((size, 2))
    F = rng.integers(-4, 5, size=(50, 2))
    cos_c, sin_c = rng.standard_normal(50), rng.standard_normal(50)
    nv, per = size // 4, 3
    Q = rng.standard_normal((nv * per, nv * per))
    Q = Q + Q.T
    ptr = np.arange(0, nv * per + 1, per, dtype=np.int64)
    w = rng.choice([-1.0, 1.0], nv * per)
    V = rng.standard_normal((size * 10, 8))
    return {
        "dirichlet_gram": (X, Y, 4),
        "trig_eval": (X, F, cos_c, sin_c),
        "schur_lowrank": (Q, ptr, w),
        "max_over_columns": (V,),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", type=int, default=400)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    print(f"backend: {_accel.backend()}")
    print(f"{'kernel':<18}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}{'max diff':>12}")
    for name, a in cases(args.size, rng).items():
        f_np = getattr(_accel, name + "_np")
        t_np = best_time(f_np, a, args.repeat)
        f_nb = getattr(_accel, name + "_nb", None)
        if f_nb is None:
            print(f"{name:<18}{1e3 * t_np:>12.3f}{'n/a':>12}")
            continue
        diff = float(np.max(np.abs(f_nb(*a) - f_np(*a))))  # also warms up
        t_nb = best_time(f_nb, a, args.repeat)
        print(f"{name:<18}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}{t_np / t_nb:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
