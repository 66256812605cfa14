"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Prints one line per kernel and problem size with the best time of each
implementation, the speedup and the largest absolute disagreement.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from bsdechaos import kernels
from bsdechaos import _kernels_py as pure


def _node_case(n, B, n_cls, rng):
    W = rng.standard_normal((n, B))
    probs = rng.random(B)
    probs /= probs.sum()
    dxc = rng.standard_normal(B)
    cls = rng.integers(0, n_cls, B)
    return (W, probs, dxc, cls, n_cls)


def _w2_case(n, rng):
    xa = np.sort(rng.standard_normal(n))
    xb = np.sort(rng.standard_normal(n) + 0.3)
    wa = rng.random(n)
    wb = rng.random(n)
    return (xa, wa / wa.sum(), xb, wb / wb.sum())


def _diff(a, b):
    if isinstance(a, tuple):
        return max(float(np.max(np.abs(np.asarray(x) - np.asarray(y)))) for x, y in zip(a, b))
    return abs(a - b)


def _time(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not kernels.COMPILED:
        print("compiled kernels unavailable; only the numpy fallback can be timed")
    rng = np.random.default_rng(args.seed)
    cases = [("node_moments", f"n={n} B={B}", _node_case(n, B, 3, rng), "node_moments")
             for n, B in ((256, 4), (16384, 4), (4096, 64))]
    cases += [("w2_sorted", f"n={n}", _w2_case(n, rng), "w2_sorted") for n in (100, 10_000, 1_000_000)]
    print(f"{'kernel':<14}{'size':<16}{'pure ms':>10}{'compiled ms':>13}{'speedup':>9}{'max diff':>11}")
    for name, size, case, attr in cases:
        tp = _time(getattr(pure, attr), case, args.repeat) * 1e3
        if kernels.COMPILED:
            fc = getattr(kernels, attr)
            tc = _time(fc, case, args.repeat) * 1e3
            diff = _diff(fc(*case), getattr(pure, attr)(*case))
            print(f"{name:<14}{size:<16}{tp:>10.3f}{tc:>13.3f}{tp / tc:>9.2f}{diff:>11.2e}")
        else:
            print(f"{name:<14}{size:<16}{tp:>10.3f}{'-':>13}{'-':>9}{'-':>11}")


if __name__ == "__main__":
    main()
