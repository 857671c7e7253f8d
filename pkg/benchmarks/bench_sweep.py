"""Time the compiled and pure-Python resonance sweeps on the same windows.

    python3 benchmarks/bench_sweep.py [--J 50 100 200] [--repeat 3]

Prints one row per window with the best-of-``repeat`` wall time of each
backend and the speed-up.  The two backends must return identical reports;
the script stops with an error otherwise.
"""

import argparse
import time

from sobolev_growth import _sweep_py, kernels
from sobolev_growth.resonance import RESONANCE_TOL


def best_time(fn, repeat):
    best, result = float("inf"), None
    for _ in range(repeat):
        start = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - start)
    return best, result


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--J", type=int, nargs="+", default=[50, 100, 200])
    parser.add_argument("--alpha", type=float, default=0.5)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    if kernels.compiled_sweep_canonical is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation` first")
    print(f"{'J':>6} {'compiled [s]':>14} {'python [s]':>12} {'speed-up':>9}")
    for J in args.J:
        tc, rc = best_time(lambda: kernels.compiled_sweep_canonical(J, args.alpha, RESONANCE_TOL), args.repeat)
        tp, rp = best_time(lambda: _sweep_py.sweep_canonical(J, args.alpha, RESONANCE_TOL), args.repeat)
        if rc != rp:
            raise SystemExit(f"backends disagree at J={J}")
        print(f"{J:>6} {tc:>14.4f} {tp:>12.4f} {tp / tc:>8.1f}x")


if __name__ == "__main__":
    main()
