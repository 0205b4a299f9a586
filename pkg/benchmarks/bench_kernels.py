"""Time the numba and numpy stencil kernels side by side.

Usage: python benchmarks/bench_kernels.py [--repeat 2000]
"""

import argparse
import timeit

import numpy as np

from rkhessian import _kernels
from rkhessian._accel import HAVE_NUMBA


def cases(rng):
    psi, v = rng.standard_normal((2, 150))
    y, dv, lam = rng.standard_normal((3, 3 * 64))
    ac = (10.0, 0.001 * 149**2, -1.0)
    return {
        "ac_rhs": lambda k: k.ac_rhs(psi, *ac),
        "ac_jvp": lambda k: k.ac_jvp(psi, v, *ac),
        "ac_vjp": lambda k: k.ac_vjp(psi, v, *ac),
        "wave_rhs": lambda k: k.wave_rhs(y, 1.0),
        "wave_jvp": lambda k: k.wave_jvp(y, dv, 1.0),
        "wave_vjp": lambda k: k.wave_vjp(y, lam, 1.0),
        "wave_so_vjp": lambda k: k.wave_so_vjp(y, dv, lam, 1.0),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=2000)
    args = parser.parse_args()
    backends = {"numpy": _kernels.numpy_kernels}
    if HAVE_NUMBA:
        backends["numba"] = _kernels.numba_kernels
    rng = np.random.default_rng(0)
    print(f"{'kernel':<12}" + "".join(f"{b + ' [us]':>14}" for b in backends) + f"{'speedup':>10}")
    for name, call in cases(rng).items():
        times = {}
        for b, k in backends.items():
            call(k)  # warm up / compile
            times[b] = min(timeit.repeat(lambda: call(k), number=args.repeat, repeat=3)) / args.repeat * 1e6
        speed = times["numpy"] / times["numba"] if "numba" in times else float("nan")
        print(f"{name:<12}" + "".join(f"{t:14.2f}" for t in times.values()) + f"{speed:10.1f}")


if __name__ == "__main__":
    main()
