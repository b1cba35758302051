"""Timing comparison of the two pair-product backends.

The package picks its backend at import time: numba when importable and
WHLATTICE_NO_NUMBA is unset, else vectorized numpy.  This script times
both implementations directly in one process on the same inputs, checks
they agree to roundoff, and prints a small table.  The compiled path is
warmed once before timing so first-call compilation stays out of the
numbers.

Usage: python benchmarks/bench_backends.py [--sites N] [--repeats R]
"""

import argparse
import time

import numpy as np

import whlattice.kernels as K
from whlattice._accel import _pair_sums_numpy, backend_name, pair_product_sums
from whlattice.config import BuildConfig
from whlattice.semicardinal import build_semicardinal

CASES = [
    ("M4 line, box 40", K.bspline(4), 2, 40, 512),
    ("Matern line, box 48", K.matern(1, 2.0), 40, 48, 512),
    ("Gaussian plane, box 32", K.gaussian(2, c=3.0), 7, 32, 256),
    ("GIM plane, box 256", K.gim(2, 2.0), 88, 256, 2048),
]


def site_pairs(sys, count, rng):
    pts = sys.halfspace.window(min(sys.working_radius, 20))
    ks = pts[rng.integers(0, len(pts), size=count)]
    js = pts[rng.integers(0, len(pts), size=count)]
    return ks, js


def best_of(repeats, fn, *args):
    out = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        out = min(out, time.perf_counter() - t0)
    return out


def main():
    ap = argparse.ArgumentParser(
        description="compare the compiled and numpy pair-product backends"
    )
    ap.add_argument("--sites", type=int, default=200,
                    help="number of (k, j) pairs per case (default 200)")
    ap.add_argument("--repeats", type=int, default=3,
                    help="timing repeats, best-of (default 3)")
    args = ap.parse_args()

    rng = np.random.default_rng(7)
    sel = backend_name()
    print(f"package backend at import: {sel}")
    print(f"{'case':<24} {'sites':>5} {sel:>10} {'numpy ref':>10} "
          f"{'speedup':>8} {'max diff':>10}")
    for label, kern, rs, rc, m in CASES:
        sys = build_semicardinal(
            kern, None, BuildConfig(sample_radius=rs, coeff_radius=rc, grid_m=m)
        )
        ks, js = site_pairs(sys, args.sites, rng)
        g, hs = sys.factor.gamma.coeffs, sys.halfspace
        fast = pair_product_sums(g, ks, js, hs)  # warm compile
        slow = _pair_sums_numpy(g, ks, js, hs)
        diff = float(np.max(np.abs(fast - slow)))
        t_fast = best_of(args.repeats, pair_product_sums, g, ks, js, hs)
        t_slow = best_of(args.repeats, _pair_sums_numpy, g, ks, js, hs)
        print(f"{label:<24} {args.sites:>5} {t_fast:>9.4f}s {t_slow:>9.4f}s "
              f"{t_slow / t_fast:>7.1f}x {diff:>10.2e}")


if __name__ == "__main__":
    main()
