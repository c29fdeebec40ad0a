"""Time the compiled kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--repeat 5] [--csv out.csv]

The residual scan is timed with and without an abandonment bound; the
bound is a filter threshold just above the planted member's residual.
"""
import argparse
import csv
import sys
import timeit

import numpy as np

from famapprox import _kernels_py

try:
    from famapprox import _kernels
except ImportError:
    _kernels = None

# (n, family size, sketch columns)
SHAPES = [(8, 65536, 64), (16, 4096, 64), (32, 256, 102), (32, 4096, 16), (64, 256, 128)]


def cases(rng):
    for n, k, l in SHAPES:
        # planted-like stack: member 0 sits at distance 0.1 from A, the rest
        # at least three times further, as in a filter step near OPT
        A = rng.standard_normal((n, n))
        D = rng.standard_normal((k, n, n))
        D /= np.linalg.norm(D, axis=(1, 2), keepdims=True)
        S = A + (0.3 + rng.random((k, 1, 1))) * D
        S[0] = A + 0.1 * D[0]
        pi = np.where(rng.random((n, l)) < 0.5, -1.0, 1.0) / np.sqrt(l)
        Z = A @ pi
        bound = (1 + 0.5 / 12) * 0.105
        images = S @ pi
        yield f"residual n={n} k={k} l={l}", lambda m, a=(Z, S, pi): m.residual_norms(*a, np.inf)
        yield f"residual+bound n={n} k={k} l={l}", lambda m, a=(Z, S, pi), b=bound: m.residual_norms(*a, b)
        yield f"distances n={n} k={k} l={l}", lambda m, a=(Z, images): m.frobenius_distances(*a)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--csv", default=None)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the numpy kernels are available", file=sys.stderr)
        return 1
    rows = []
    print(f"{'case':40s} {'numpy ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, fn in cases(np.random.default_rng(0)):
        t_py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat)) * 1e3
        t_cy = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=args.repeat)) * 1e3
        rows.append({"case": name, "numpy_ms": f"{t_py:.3f}", "cython_ms": f"{t_cy:.3f}",
                     "speedup": f"{t_py / t_cy:.2f}"})
        print(f"{name:40s} {t_py:10.3f} {t_cy:10.3f} {t_py / t_cy:8.2f}")
    if args.csv:
        with open(args.csv, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
