"""Compiled inner loop for half-space pair products, with a numpy fallback.

The one genuinely loop-shaped hot spot in the package is the double sum

    a(k, j) = sum over m of g[m] * g[m + j - k] * [k - m in H]

taken over the coefficient box of a half-space factor g, once per (k, j)
pair.  Everything else in the package collapses to FFTs or dense algebra.

Backend selection happens at import time: numba when it is importable and
the environment variable WHLATTICE_NO_NUMBA is unset (or "0"), otherwise a
vectorized numpy implementation of the same sum.  Both backends walk the
box in row-major order; results agree to roundoff, not bit-for-bit.
"""

from __future__ import annotations

import os

import numpy as np

from .lattice import HalfSpace, box_points

__all__ = ["backend_name", "pair_product_sums"]

_DISABLED = os.environ.get("WHLATTICE_NO_NUMBA", "") not in ("", "0")

try:
    if _DISABLED:
        raise ImportError("numba disabled by WHLATTICE_NO_NUMBA")
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:
    _HAVE_NUMBA = False


def backend_name() -> str:
    return "numba" if _HAVE_NUMBA else "numpy"


def _pair_sums_numpy(
    gamma: np.ndarray, kpts: np.ndarray, jpts: np.ndarray, halfspace: HalfSpace
) -> np.ndarray:
    d = gamma.ndim
    n = (gamma.shape[0] - 1) // 2
    flat = gamma.ravel()
    support = np.nonzero(flat)[0]
    mpts = box_points([-n] * d, [n] * d)[support]
    gvals = flat[support]
    out = np.empty(len(kpts))
    for i in range(len(kpts)):
        shifted = mpts + (jpts[i] - kpts[i])
        inbox = np.all(np.abs(shifted) <= n, axis=1)
        lives = halfspace.contains_many(kpts[i] - mpts[inbox])
        second = np.ravel_multi_index((shifted[inbox][lives] + n).T, gamma.shape)
        out[i] = float(gvals[inbox][lives] @ flat[second])
    return out


if _HAVE_NUMBA:

    @njit(cache=True)
    def _pair_sums_numba(gflat, shape, kpts, jpts, code, axis0, key_axes):
        d = shape.size
        n = (shape[0] - 1) // 2
        out = np.zeros(kpts.shape[0])
        m = np.empty(d, np.int64)
        for p in range(kpts.shape[0]):
            acc = 0.0
            for flat in range(gflat.size):
                g1 = gflat[flat]
                if g1 == 0.0:
                    continue
                rem = flat
                for a in range(d - 1, -1, -1):
                    m[a] = rem % shape[a] - n
                    rem //= shape[a]
                flat2 = 0
                ok = True
                for a in range(d):
                    v = m[a] + jpts[p, a] - kpts[p, a]
                    if v < -n or v > n:
                        ok = False
                        break
                    flat2 = flat2 * shape[a] + (v + n)
                if not ok:
                    continue
                g2 = gflat[flat2]
                if g2 == 0.0:
                    continue
                # membership of l = k - m in the half-space
                if code == 0:
                    if kpts[p, axis0] - m[axis0] < 0:
                        continue
                else:
                    s = 0
                    if code == 2:
                        t = 0
                        for a in range(d):
                            t += kpts[p, a] - m[a]
                        if t > 0:
                            s = 1
                        elif t < 0:
                            s = -1
                    if s == 0:
                        for ai in range(key_axes.size):
                            v = kpts[p, key_axes[ai]] - m[key_axes[ai]]
                            if v != 0:
                                s = 1 if v > 0 else -1
                                break
                    if s < 0:
                        continue
                acc += g1 * g2
            out[p] = acc
        return out


def pair_product_sums(
    gamma: np.ndarray, kpts, jpts, halfspace: HalfSpace
) -> np.ndarray:
    """a(k, j) for each row of kpts/jpts, from the factor box ``gamma``."""
    kpts = np.asarray(kpts, dtype=np.int64)
    jpts = np.asarray(jpts, dtype=np.int64)
    if _HAVE_NUMBA:
        code, axis0, key_axes = halfspace.descriptor()
        return _pair_sums_numba(
            gamma.ravel(),
            np.asarray(gamma.shape, dtype=np.int64),
            kpts,
            jpts,
            code,
            axis0,
            key_axes,
        )
    return _pair_sums_numpy(gamma, kpts, jpts, halfspace)
