"""Time the compiled tridiagonal kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--sizes 1001,4001,16001] [--repeat 5]

Both backends run on the same diagonally dominant system; the script also
reports the largest difference between their answers.
"""

import argparse
import timeit

import numpy as np

from boundary_yamabe import _pykernels as pure
from boundary_yamabe import kernels

try:
    from boundary_yamabe import _kernels as compiled
except ImportError:
    compiled = None


def system(n, seed=0):
    rng = np.random.default_rng(seed)
    off = -rng.uniform(0.5, 1.0, n - 1)
    diag = 2.0 + rng.uniform(0.0, 0.5, n)
    return off, diag, off.copy(), rng.normal(size=n)


def best_time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="1001,4001,16001")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; only the fallback is available")
        return 1
    print(f"active backend: {kernels.BACKEND}")
    print(f"{'kernel':<16}{'N':>8}{'compiled [s]':>14}{'python [s]':>14}{'speed-up':>10}{'max diff':>11}")
    for n in (int(s) for s in args.sizes.split(",")):
        sub, diag, sup, rhs = system(n)
        cases = {
            "thomas": (lambda m: m.thomas(sub, diag, sup, rhs, 0.0)[0]),
            "negative_pivots": (lambda m: np.array([m.negative_pivots(sub, diag - 2.2, sup)])),
            "matvec": (lambda m: m.matvec(sub, diag, sup, rhs)),
        }
        for name, call in cases.items():
            tc = best_time(lambda: call(compiled), args.repeat)
            tp = best_time(lambda: call(pure), args.repeat)
            diff = float(np.max(np.abs(np.asarray(call(compiled)) - np.asarray(call(pure)))))
            print(f"{name:<16}{n:>8}{tc:>14.2e}{tp:>14.2e}{tp / tc:>10.1f}{diff:>11.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
