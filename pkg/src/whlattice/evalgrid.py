"""Evaluation of kernel series over lattice windows.

Both routines compute sums s(x) = sum_k c_k f(x - k) for a coefficient box
c.  ``field_sum`` handles arbitrary point sets by blocked broadcasting;
``offset_lattice_field`` evaluates on a whole shifted lattice window at
once, where the sum collapses to a single convolution of a sampled field
with the coefficient box.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.signal import fftconvolve

from .lattice import box_points

__all__ = ["field_sum", "offset_lattice_field"]

PointEval = Callable[[np.ndarray], np.ndarray]

# cap on broadcast-buffer entries per block
_BLOCK_BUDGET = 1 << 21


def field_sum(
    point_eval: PointEval,
    coeffs: np.ndarray,
    lo: np.ndarray,
    x: np.ndarray,
) -> np.ndarray:
    """s(x_i) = sum over the box of coeffs[idx] * f(x_i - (lo + idx))."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = x.shape[1]
    if coeffs.ndim != d:
        raise ValueError(f"coefficient box is {coeffs.ndim}-dimensional, "
                         f"points are {d}-dimensional")
    lattice = np.asarray(lo, dtype=float) + box_points(
        [0] * d, [n - 1 for n in coeffs.shape]
    )
    flat = coeffs.ravel()
    out = np.empty(x.shape[0])
    step = max(1, _BLOCK_BUDGET // max(lattice.shape[0], 1))
    for start in range(0, x.shape[0], step):
        block = x[start:start + step]
        diffs = block[:, None, :] - lattice[None, :, :]
        vals = point_eval(diffs.reshape(-1, d)).reshape(block.shape[0], -1)
        out[start:start + step] = vals @ flat
    return out


def offset_lattice_field(
    point_eval: PointEval,
    coeffs: np.ndarray,
    coeff_radius: int,
    offset: np.ndarray,
    out_radius: int,
) -> np.ndarray:
    """Values s(offset + n) on the centered box of the given radius.

    Samples f on the fattened box of radius out_radius + coeff_radius and
    convolves with the coefficient box; "valid" mode leaves exactly the
    target window.  Requires the coefficient box to be centered, i.e. of
    shape (2*coeff_radius + 1)^d.
    """
    offset = np.asarray(offset, dtype=float)
    d = offset.shape[0]
    if coeffs.shape != (2 * coeff_radius + 1,) * d:
        raise ValueError("coefficient box shape does not match its radius")
    reach = out_radius + coeff_radius
    pts = offset + box_points([-reach] * d, [reach] * d)
    f = point_eval(pts).reshape((2 * reach + 1,) * d)
    out = fftconvolve(f, coeffs, mode="valid")
    if out.shape != (2 * out_radius + 1,) * d:
        raise AssertionError("convolution window bookkeeping went wrong")
    return out
