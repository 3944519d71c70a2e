"""Compiled vs pure-Python RK4 kernels on the Blasius shooting loop.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--n 4096]
"""
import argparse
import timeit

import numpy as np

from prandtl_toolkit import _kernels_py

try:
    from prandtl_toolkit import _kernels as _compiled
except ImportError:
    _compiled = None


def bench(mod, s, eta_max, n, repeat):
    t_end = min(timeit.repeat(lambda: mod.rk4_blasius_end(s, eta_max, n), number=1, repeat=repeat))
    t_full = min(timeit.repeat(lambda: mod.rk4_blasius(s, eta_max, n), number=1, repeat=repeat))
    return t_end, t_full


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--n", type=int, default=4096)
    ap.add_argument("--eta-max", type=float, default=12.0)
    args = ap.parse_args()
    s = 0.4696
    rows = [("python", _kernels_py)]
    if _compiled is not None:
        rows.insert(0, ("cython", _compiled))
    else:
        print("compiled extension not built; timing the fallback only")
    times = {}
    for name, mod in rows:
        times[name] = bench(mod, s, args.eta_max, args.n, args.repeat)
        print(f"{name:7s} end-value {times[name][0] * 1e3:9.3f} ms   full profile {times[name][1] * 1e3:9.3f} ms")
    if _compiled is not None:
        a = _compiled.rk4_blasius(s, args.eta_max, args.n)
        b = _kernels_py.rk4_blasius(s, args.eta_max, args.n)
        print(f"max |cython - python| = {np.abs(a - b).max():.3e}")
        print(f"speed-up: end-value x{times['python'][0] / times['cython'][0]:.1f}, "
              f"full profile x{times['python'][1] / times['cython'][1]:.1f}")


if __name__ == "__main__":
    main()
