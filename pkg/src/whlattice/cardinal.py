"""Interpolation on the full integer lattice.

The coefficients a_k of the reciprocal symbol turn kernel translates into
a Lagrange basis: chi = sum_k a_k phi(. - k) satisfies chi(j) = delta_j0
on the lattice, and bounded data y is interpolated by s = sum_j y_j
chi(. - j), equivalently by s = sum_k c_k phi(. - k) with c = a * y.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .config import BuildConfig, resolve_radii
from .errors import CapabilityError, ConfigError, VerificationError
from .evalgrid import field_sum, offset_lattice_field
from .kernels import Kernel, decay_truncation_radius
from .lattice import box_points
from .symbols import (
    SymbolCoefficients,
    multiply,
    reciprocal,
    symbol_from_kernel,
    wiener_norm,
)

__all__ = [
    "CardinalSystem",
    "DataWindow",
    "LebesgueReport",
    "build_cardinal",
    "chi_eval",
    "chi_on_lattice",
    "cardinal_interpolate",
    "lebesgue_estimate",
]

# chi is evaluated over the box where the dropped coefficient tail,
# multiplied by the kernel's peak, falls below this
_EVAL_TAIL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class CardinalSystem:
    """Everything needed to interpolate on Z^d with one kernel.

    omega holds the reciprocal-symbol coefficients a_k; eval_radius is the
    box actually used when summing a_k * phi(x - k) pointwise.
    """

    kernel: Kernel
    sigma: SymbolCoefficients
    omega: SymbolCoefficients
    eval_radius: int


@dataclass(frozen=True)
class LebesgueReport:
    """Sampled operator norm next to its analytic ceiling.

    estimate is a lower estimate (finite window, finite cell sampling);
    upper_bound = ||a||_1 * max sampled lattice sum of |phi|, which
    dominates the true norm, so estimate <= upper_bound always.
    """

    estimate: float
    upper_bound: float
    phi_cell_sum: float
    grid_per_cell: int
    eval_radius: int
    tail_radius: int


def _ring_suffix(values: np.ndarray, radius: int) -> np.ndarray:
    """suffix[r] = sum of |values| over sup-norm rings >= r."""
    d = values.ndim
    mags = np.meshgrid(*[np.abs(np.arange(-radius, radius + 1))] * d,
                       indexing="ij")
    ring = np.maximum.reduce(mags)
    sums = np.bincount(ring.ravel(), weights=np.abs(values).ravel(),
                       minlength=radius + 1)
    return np.cumsum(sums[::-1])[::-1]


def _peak(kernel: Kernel) -> float:
    return float(abs(kernel.eval_many(np.zeros((1, kernel.dim)))[0]))


def build_cardinal(kernel: Kernel, config: BuildConfig | None = None) -> CardinalSystem:
    cfg = config if config is not None else BuildConfig()
    rs, rc, m = resolve_radii(kernel, cfg)
    sigma = symbol_from_kernel(kernel, rs)
    omega = reciprocal(sigma, m=m, radius=rc)

    defect = omega.symmetry_defect()
    if defect > 1e-12 * max(1.0, float(np.abs(omega.coeffs).max())):
        raise VerificationError(
            f"reciprocal coefficients lost their symmetry (defect {defect:.3e})"
        )
    prod = multiply(sigma, omega)
    delta = prod.coeffs.copy()
    delta[(prod.radius,) * kernel.dim] -= 1.0
    delta_defect = float(np.abs(delta).max())
    if delta_defect > cfg.delta_tol:
        raise VerificationError(
            f"sigma * omega misses the unit family by {delta_defect:.3e} "
            f"(tolerance {cfg.delta_tol:.3e}); radii are too small"
        )

    suffix = _ring_suffix(omega.coeffs, rc)
    peak = max(_peak(kernel), 1e-30)
    eval_radius = rc
    for r in range(rc + 1):
        tail = suffix[r + 1] if r + 1 <= rc else 0.0
        if tail * peak < _EVAL_TAIL_TOL:
            eval_radius = r
            break
    return CardinalSystem(kernel=kernel, sigma=sigma, omega=omega,
                          eval_radius=eval_radius)


def _eval_box(sys: CardinalSystem) -> np.ndarray:
    trim = sys.omega.radius - sys.eval_radius
    if trim == 0:
        return sys.omega.coeffs
    sl = (slice(trim, -trim),) * sys.omega.dim
    return sys.omega.coeffs[sl]


def chi_eval(sys: CardinalSystem, x) -> float | np.ndarray:
    """Lagrange function at arbitrary points.

    Accepts a single point of shape (d,) or a batch of shape (n, d).
    Kernels without off-lattice evaluation raise CapabilityError unless
    every coordinate is an integer.
    """
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    box = _eval_box(sys)
    lo = np.full(sys.kernel.dim, -sys.eval_radius)
    out = field_sum(sys.kernel.eval_many, box, lo, np.atleast_2d(pts))
    return float(out[0]) if single else out


def chi_on_lattice(sys: CardinalSystem, out_radius: int,
                   offset=None) -> np.ndarray:
    """chi(offset + n) over the centered lattice box of the given radius."""
    if offset is None:
        offset = np.zeros(sys.kernel.dim)
    return offset_lattice_field(sys.kernel.eval_many, _eval_box(sys),
                                sys.eval_radius, np.asarray(offset, float),
                                out_radius)


# ---------------------------------------------------------------------------
# data windows and the interpolation operator


@dataclass(frozen=True, eq=False)
class DataWindow:
    """Finite block of lattice data: values[idx] sits at lo + idx."""

    lo: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=np.int64))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.lo.shape != (self.values.ndim,):
            raise ConfigError("window corner and value block disagree on dimension")

    @classmethod
    def centered(cls, values) -> "DataWindow":
        values = np.asarray(values, dtype=float)
        if any(n % 2 == 0 for n in values.shape):
            raise ConfigError("a centered window needs odd side lengths")
        lo = [-(n - 1) // 2 for n in values.shape]
        return cls(np.array(lo), values)

    def points(self) -> np.ndarray:
        hi = self.lo + np.array(self.values.shape) - 1
        return box_points(self.lo, hi)

    def tiled(self, copies: int) -> "DataWindow":
        reps = 2 * copies + 1
        vals = np.tile(self.values, (reps,) * self.values.ndim)
        lo = self.lo - copies * np.array(self.values.shape)
        return DataWindow(lo, vals)


def cardinal_interpolate(
    sys: CardinalSystem,
    window: DataWindow,
    x,
    route: str = "coefficient",
    extension: str = "zero",
    periodic_copies: int = 2,
) -> float | np.ndarray:
    """Interpolant of windowed data, evaluated at x.

    route "coefficient" convolves the data with a_k and sums kernel
    translates; route "lagrange" sums data against the Lagrange function
    directly.  extension "zero" treats data as zero outside the window;
    "periodic" tiles the window (periodic_copies replicas each side), so
    accuracy then holds only well inside the replicated region.
    """
    if route not in ("coefficient", "lagrange"):
        raise ConfigError(f"unknown interpolation route {route!r}")
    if extension not in ("zero", "periodic"):
        raise ConfigError(f"unknown extension policy {extension!r}")
    if extension == "periodic":
        window = window.tiled(periodic_copies)
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    X = np.atleast_2d(pts)

    if route == "lagrange":
        sites = window.points().astype(float)
        diffs = (X[:, None, :] - sites[None, :, :]).reshape(-1, X.shape[1])
        chis = chi_eval(sys, diffs).reshape(X.shape[0], -1)
        out = chis @ window.values.ravel()
    else:
        coeffs = fftconvolve(window.values, sys.omega.coeffs, mode="full")
        lo = window.lo - sys.omega.radius
        out = field_sum(sys.kernel.eval_many, coeffs, lo, X)
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# Lebesgue constant


def _phi_reach(kernel: Kernel, tol: float = 1e-9, cap: int = 96) -> int:
    if kernel.support_radius is not None:
        return kernel.support_radius
    with warnings.catch_warnings():
        # hitting the cap only truncates a lower estimate further
        warnings.simplefilter("ignore")
        return decay_truncation_radius(kernel, tol, max_radius=cap)


def lebesgue_estimate(
    sys: CardinalSystem,
    grid_per_cell: int = 17,
    *,
    eval_radius: int | None = None,
    tail_radius: int | None = None,
) -> LebesgueReport:
    """Max over a sampled unit cell of sum_j |chi(x - j)|.

    The sum over j is truncated to a sup-norm box, and chi itself to
    eval_radius, so the estimate can only undershoot; the reported
    upper_bound dominates the true operator norm regardless.
    """
    if not sys.kernel.full_eval:
        raise CapabilityError(
            f"{sys.kernel.family} cannot be evaluated off the lattice"
        )
    if grid_per_cell < 1:
        raise ConfigError("grid_per_cell must be at least 1")
    d = sys.kernel.dim
    re_ = min(eval_radius if eval_radius is not None else sys.eval_radius,
              sys.omega.radius)
    trim = sys.omega.radius - re_
    box = sys.omega.coeffs if trim == 0 else \
        sys.omega.coeffs[(slice(trim, -trim),) * d]
    t = tail_radius if tail_radius is not None else re_ + _phi_reach(sys.kernel)
    reach = t + re_
    base = box_points([-reach] * d, [reach] * d).astype(float)

    estimate = 0.0
    phi_cell = 0.0
    for frac in itertools.product(range(grid_per_cell), repeat=d):
        x0 = np.array(frac, dtype=float) / grid_per_cell
        f = sys.kernel.eval_many(x0 + base).reshape((2 * reach + 1,) * d)
        phi_cell = max(phi_cell, float(np.abs(f).sum()))
        chi_vals = fftconvolve(f, box, mode="valid")
        estimate = max(estimate, float(np.abs(chi_vals).sum()))
    return LebesgueReport(
        estimate=estimate,
        upper_bound=wiener_norm(sys.omega) * phi_cell,
        phi_cell_sum=phi_cell,
        grid_per_cell=grid_per_cell,
        eval_radius=re_,
        tail_radius=t,
    )
