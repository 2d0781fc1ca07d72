"""Time the compiled kernels against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Both backends are imported directly, so the comparison does not depend on
RDLAMBDA_PURE_PYTHON. Workloads mirror the hot paths: one GOP allocation
(central lambda search) and one objective evaluation of each R-D fit.
"""
import argparse
import sys
import timeit

import numpy as np

from rdlambda import _kernels_py

try:
    from rdlambda import _kernels
except ImportError:
    _kernels = None


def workloads(rng):
    n = 8
    alpha = rng.uniform(2.0, 8.0, n)
    beta = rng.uniform(-1.6, -1.1, n)
    gamma = rng.uniform(0.0, 0.01, n)
    omega = rng.uniform(1.0, 10.0, n)
    bpp = np.geomspace(0.005, 2.0, 48)
    mse = 5.0 * (bpp + 0.01) ** -1.05 - 0.2
    classic = np.log([5.0, 1.05])
    proposed = np.log([5.0, 1.05, 0.01, 0.2])
    return {
        "rate_sum": lambda k: k.rate_sum(50.0, alpha, beta, gamma, omega, 2.5e-4),
        "central_lambda": lambda k: k.central_lambda(alpha, beta, gamma, omega, 0.8, 2.5e-4),
        "sse_classic": lambda k: k.sse_classic(classic, bpp, mse),
        "sse_proposed": lambda k: k.sse_proposed(proposed, bpp, mse),
    }


def best_time(fn, backend, repeat):
    timer = timeit.Timer(lambda: fn(backend))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if _kernels is None:
        print("compiled kernels not built; run `pip install -e . --no-build-isolation`")
        return 1
    print(f"{'kernel':<16}{'python (us)':>14}{'cython (us)':>14}{'speedup':>10}")
    for name, fn in workloads(np.random.default_rng(0)).items():
        py = best_time(fn, _kernels_py, args.repeat)
        cy = best_time(fn, _kernels, args.repeat)
        print(f"{name:<16}{py * 1e6:>14.2f}{cy * 1e6:>14.2f}{py / cy:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
