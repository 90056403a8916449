"""Compiled core vs numpy fallback on the hot loops.

Usage: ``python benchmarks/bench_core.py [--repeat 5]``. Prints median
seconds per call for each backend and the speedup.
"""

import argparse
import timeit

import numpy as np

from bbgamma import _backend
from bbgamma import _core_py as fallback

BB, L2 = 0, 0


def cases(rng):
    n, d = 600, 20
    X = np.ascontiguousarray(np.c_[rng.normal(size=(n, d)), np.ones(n)])
    y = rng.integers(0, 2, n).astype(float)
    coef = rng.normal(scale=0.3, size=d + 1)
    hyper = (BB, 0.0098, 0.9804, 20.0)
    prior = (L2, np.array([0.1, 0.0, 0.0, 0.0]))
    steps = np.array([0.05, -0.05, 0.1, -0.1, 0.2, -0.2, 0.4, -0.4, 8.0, -8.0])
    XT = np.ascontiguousarray(X.T)
    A = rng.normal(size=(400, 8))
    return {
        "objective_value_grad": lambda m: m.objective_value_grad(X, y, coef, *hyper, *prior),
        "gradient_ascent (200 steps)": lambda m: m.gradient_ascent(X, y, coef.copy(), *hyper, *prior,
                                                                  0.01, 1e-9, 0.5, 0.0, 0.0, 200),
        # a huge threshold makes every coordinate and step get scanned
        "probe_pass (full scan)": lambda m: m.probe_pass(XT, X @ coef, y, coef, *hyper, *prior, steps, 1e30),
        "rbf_gram 400x400": lambda m: m.rbf_gram(A, A, 1.5),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _backend.COMPILED:
        raise SystemExit("compiled core not built; run `pip install --no-build-isolation -e .` first")
    compiled = _backend.core
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'compiled (s)':>14s} {'fallback (s)':>14s} {'speedup':>8s}")
    for name, call in cases(rng).items():
        times = {}
        for label, mod in (("compiled", compiled), ("fallback", fallback)):
            timer = timeit.Timer(lambda: call(mod))
            number, _ = timer.autorange()
            times[label] = float(np.median(timer.repeat(args.repeat, number))) / number
        print(f"{name:32s} {times['compiled']:14.2e} {times['fallback']:14.2e} "
              f"{times['fallback'] / times['compiled']:7.1f}x")


if __name__ == "__main__":
    main()
