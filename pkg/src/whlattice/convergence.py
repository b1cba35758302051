"""Boundary field of the plus factor and half-space convergence checks.

Pushing the plus-factor coefficients through the kernel gives the field

    eta(x) = sum over k in H of g_k phi(x - k),

and both interpolation schemes collapse onto it: the full-lattice cardinal
function is a second g-combination of eta translates, and so is every
half-space Lagrange function, with the combination cut off at the site j.
Comparing the two combinations term by term turns the distance between the
half-space interpolant and the full-lattice one into a tail sum of the
plus-factor coefficients beyond j, which is what ``convergence_gap``
measures and bounds.

Representation residuals are computed against the production evaluation
paths, never against a rearrangement of themselves: the reference side
always samples the kernel directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy.signal import fftconvolve

from .cardinal import CardinalSystem
from .errors import CapabilityError, ConfigError, VerificationError
from .evalgrid import field_sum, offset_lattice_field
from .kernels import Kernel
from .lattice import HalfSpace, as_index_array, ball_points, box_points
from .semicardinal import SemiCardinalSystem, sc_column
from .wienerhopf import WienerHopfFactor

__all__ = [
    "EtaFunction",
    "eta_function",
    "eta_eval",
    "eta_sup",
    "default_grid",
    "chi_via_eta",
    "chij_via_eta",
    "convergence_gap",
    "gamma_tail",
    "exhausting_index",
]

# nested-sum evaluation is used below this many kernel calls
_DIRECT_BUDGET = 200_000_000


def default_grid(dim: int, radius: float = 3.0, step: float = 0.25) -> np.ndarray:
    """Sample points of the box [-radius, radius]^dim with the given step."""
    axis = np.arange(-radius, radius + step / 2, step)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True, eq=False)
class EtaFunction:
    """Field of the plus-factor coefficients, truncated to eval_radius."""

    factor: WienerHopfFactor
    kernel: Kernel
    eval_radius: int
    _tables: dict = field(default_factory=dict, repr=False)
    _sup: dict = field(default_factory=dict, repr=False)


def eta_function(system: SemiCardinalSystem, eval_radius: int | None = None) -> EtaFunction:
    if not system.kernel.full_eval:
        raise CapabilityError(
            f"kernel {system.kernel.family!r} has no off-lattice evaluation"
        )
    radius = system.factor.gamma.radius
    if eval_radius is None:
        eval_radius = radius
    if not 1 <= eval_radius <= radius:
        raise ConfigError(
            f"eval_radius must lie in 1..{radius}, got {eval_radius}"
        )
    return EtaFunction(system.factor, system.kernel, int(eval_radius))


def _weights(e: EtaFunction) -> np.ndarray:
    """Centered plus-factor box at eval_radius (entries off H are zero)."""
    g = e.factor.gamma
    if e.eval_radius == g.radius:
        return g.coeffs
    cut = slice(g.radius - e.eval_radius, g.radius + e.eval_radius + 1)
    return g.coeffs[(cut,) * g.dim]


def eta_eval(e: EtaFunction, x) -> np.ndarray | float:
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if pts.shape[1] != e.kernel.dim:
        raise ConfigError(
            f"points have dimension {pts.shape[1]}, kernel has {e.kernel.dim}"
        )
    r = e.eval_radius
    out = field_sum(e.kernel.eval_many, _weights(e), [-r] * e.kernel.dim, pts)
    if np.asarray(x).ndim == 1:
        return float(out[0])
    return out


def eta_sup(e: EtaFunction, grid: np.ndarray | None = None) -> float:
    """Largest |eta| over the sample grid.

    A sampled maximum can only undershoot the true supremum; reports that
    quote it as the constant of a tail bound carry that caveat.
    """
    key = "default" if grid is None else None
    if key is not None and key in e._sup:
        return e._sup[key]
    pts = default_grid(e.kernel.dim) if grid is None else np.atleast_2d(grid)
    val = float(np.max(np.abs(eta_eval(e, pts))))
    if key is not None:
        e._sup[key] = val
    return val


# ---------------------------------------------------------------------------
# grouped lattice evaluation
#
# Sample grids are unions of integer translates of a few fractional
# offsets.  Splitting x = n + f (n = nearest lattice point) turns a field
# sum over any centered coefficient box into one valid-mode convolution
# per distinct f, which is what makes the wide 2-d boxes affordable.  The
# kernel samples per offset are shared between the production and the
# reference side; what differs is the summation applied to them.


def _offset_groups(x: np.ndarray) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    n = np.rint(x).astype(np.int64)
    f = x - n
    uniq, inverse = np.unique(f, axis=0, return_inverse=True)
    for gi in range(uniq.shape[0]):
        rows = np.nonzero(inverse == gi)[0]
        yield uniq[gi], n[rows], rows


def _phi_table(e: EtaFunction, f: np.ndarray, reach: int) -> np.ndarray:
    """Kernel samples on f + centered box, cached at the widest reach."""
    d = e.kernel.dim
    key = ("phi", f.tobytes())
    held = e._tables.get(key)
    if held is None or held[0] < reach:
        pts = f + box_points([-reach] * d, [reach] * d)
        vals = e.kernel.eval_many(pts).reshape((2 * reach + 1,) * d)
        e._tables[key] = held = (reach, vals)
    r0, vals = held
    if r0 == reach:
        return vals
    cut = slice(r0 - reach, r0 + reach + 1)
    return vals[(cut,) * d]


def _field_on_points(kernel: Kernel, coeffs: np.ndarray, radius: int,
                     x: np.ndarray, cache: EtaFunction | None = None) -> np.ndarray:
    """sum_k coeffs[k] phi(x_i - k) for a centered coefficient box."""
    out = np.empty(x.shape[0])
    for f, ns, rows in _offset_groups(x):
        nmax = int(np.abs(ns).max(initial=0))
        if cache is not None:
            table = fftconvolve(_phi_table(cache, f, nmax + radius), coeffs,
                                mode="valid")
        else:
            table = offset_lattice_field(kernel.eval_many, coeffs, radius,
                                         f, nmax)
        out[rows] = table[tuple((ns + nmax).T)]
    return out


def _prewarm(e: EtaFunction, x: np.ndarray, reach: int) -> None:
    """Sample each offset's field once, at the widest reach a check needs."""
    for f, ns, _ in _offset_groups(x):
        _phi_table(e, f, int(np.abs(ns).max(initial=0)) + reach)


def _eta_table(e: EtaFunction, f: np.ndarray, out_radius: int) -> np.ndarray:
    key = ("eta", f.tobytes(), out_radius)
    if key not in e._tables:
        e._tables[key] = fftconvolve(
            _phi_table(e, f, out_radius + e.eval_radius), _weights(e),
            mode="valid",
        )
    return e._tables[key]


def _eta_combination(e: EtaFunction, weights: np.ndarray, x: np.ndarray,
                     direct: bool) -> np.ndarray:
    """sum_s weights[s] eta(x_i + s) over the centered eval_radius box."""
    r = e.eval_radius
    d = e.kernel.dim
    if direct:
        pts = box_points([-r] * d, [r] * d)
        keep = weights.ravel() != 0.0
        out = np.zeros(x.shape[0])
        for s, w in zip(pts[keep], weights.ravel()[keep]):
            out += w * eta_eval(e, x + s)
        return out
    out = np.empty(x.shape[0])
    flipped = np.flip(weights)
    for f, ns, rows in _offset_groups(x):
        nmax = int(np.abs(ns).max(initial=0))
        table = _eta_table(e, f, nmax + r)
        comb = fftconvolve(table, flipped, mode="valid")
        out[rows] = comb[tuple((ns + nmax).T)]
    return out


def _pick_direct(e: EtaFunction, n_points: int) -> bool:
    active = int(np.count_nonzero(_weights(e)))
    return n_points * active * active <= _DIRECT_BUDGET


# ---------------------------------------------------------------------------
# representation residuals


def _check_kernel(e: EtaFunction, kernel: Kernel) -> None:
    if kernel is not e.kernel and (kernel.family, kernel.dim, kernel.params) != (
        e.kernel.family, e.kernel.dim, e.kernel.params
    ):
        raise ConfigError("system kernel differs from the field's kernel")


def chi_via_eta(e: EtaFunction, system: CardinalSystem,
                x: np.ndarray | None = None) -> float:
    """Residual of rebuilding the cardinal function from eta translates.

    The reference side combines eta values with the plus-factor
    coefficients; the production side is the cardinal coefficient route.
    """
    _check_kernel(e, system.kernel)
    pts = default_grid(e.kernel.dim) if x is None else np.atleast_2d(x)
    direct = _pick_direct(e, pts.shape[0])
    if not direct:
        _prewarm(e, pts, max(system.omega.radius, 2 * e.eval_radius))
    lhs = _field_on_points(system.kernel, system.omega.coeffs,
                           system.omega.radius, pts,
                           cache=None if direct else e)
    rhs = _eta_combination(e, _weights(e), pts, direct)
    return float(np.max(np.abs(lhs - rhs)))


def chij_via_eta(e: EtaFunction, system: SemiCardinalSystem, j,
                 x: np.ndarray | None = None) -> float:
    """Residual of rebuilding the Lagrange function at j from eta translates.

    The combination runs over the sites l in H with j - l in H; relabeled
    by s = j - l it contracts the plus-factor box, masked to that site
    set, against eta sampled at x - j + s.
    """
    _check_kernel(e, system.kernel)
    j = as_index_array(j, system.kernel.dim)[0]
    d = e.kernel.dim
    pts = j + default_grid(d) if x is None else np.atleast_2d(x)
    col = sc_column(system, j)
    n = system.working_radius
    direct = _pick_direct(e, pts.shape[0])
    if not direct:
        _prewarm(e, pts - j.astype(float), 2 * max(n, e.eval_radius))
    lhs = _field_on_points(system.kernel, col.values, 2 * n,
                           pts - j.astype(float),
                           cache=None if direct else e)
    r = e.eval_radius
    spts = box_points([-r] * d, [r] * d)
    keep = system.halfspace.contains_many(j - spts).reshape(_weights(e).shape)
    weights = np.where(keep, _weights(e), 0.0)
    rhs = _eta_combination(e, weights, pts - j.astype(float), direct)
    return float(np.max(np.abs(lhs - rhs)))


# ---------------------------------------------------------------------------
# convergence diagnostics


def gamma_tail(factor: WienerHopfFactor, j) -> float:
    """Coefficient mass of the plus factor strictly beyond the site j."""
    h = factor.halfspace
    j = as_index_array(j, h.dim)[0]
    g = factor.gamma
    pts = box_points([-g.radius] * h.dim, [g.radius] * h.dim)
    vals = np.abs(g.coeffs.ravel())
    if h.variant == "coordinate":
        mask = pts[:, h.axis - 1] > j[h.axis - 1]
    else:
        mask = h.order.compare_many(pts, j[None, :]) > 0
    return float(vals[mask].sum())


def convergence_gap(e: EtaFunction, cardinal_sys: CardinalSystem,
                    sc_sys: SemiCardinalSystem, j,
                    sample_grid: np.ndarray | None = None) -> tuple[float, float]:
    """Distance between the half-space and full-lattice interpolants at j.

    gap = max over the grid of |chi(x) - chi_j(x + j)|; the bound is the
    sampled maximum of |eta| times the plus-factor tail mass beyond j.
    Raises when the gap exceeds the bound, since that cannot happen if
    the factorization is sound.
    """
    _check_kernel(e, cardinal_sys.kernel)
    _check_kernel(e, sc_sys.kernel)
    d = e.kernel.dim
    j = as_index_array(j, d)[0]
    pts = default_grid(d) if sample_grid is None else np.atleast_2d(sample_grid)
    _prewarm(e, pts, max(cardinal_sys.omega.radius,
                         2 * sc_sys.working_radius))
    chi = _field_on_points(cardinal_sys.kernel, cardinal_sys.omega.coeffs,
                           cardinal_sys.omega.radius, pts, cache=e)
    col = sc_column(sc_sys, j)
    chij = _field_on_points(sc_sys.kernel, col.values,
                            2 * sc_sys.working_radius, pts, cache=e)
    gap = float(np.max(np.abs(chi - chij)))
    bound = eta_sup(e) * gamma_tail(sc_sys.factor, j)
    if gap > bound + 1e-8:
        raise VerificationError(
            f"interpolant gap {gap:.6e} exceeds its tail bound {bound:.6e}"
        )
    return gap, bound


def exhausting_index(halfspace: HalfSpace, n: int) -> np.ndarray:
    """Deepest site of H within the origin-centered ball of radius n."""
    if n < 0:
        raise ConfigError(f"ball radius must be nonnegative, got {n}")
    if halfspace.variant == "coordinate":
        j = np.zeros(halfspace.dim, dtype=np.int64)
        j[halfspace.axis - 1] = n
        return j
    pts = ball_points(halfspace.dim, n)
    pts = pts[halfspace.contains_many(pts)]
    return halfspace.order.max_point(pts)
