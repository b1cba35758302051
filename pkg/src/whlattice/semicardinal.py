"""Interpolation on half-space sublattices.

The half-space factor gamma plays the role the reciprocal symbol plays on
the full lattice.  Writing g for its coefficient family (supported on H),
the inverse of the interpolation matrix [phi(j - k)] restricted to H has
entries

    a(k, j) = sum over l in H of g[k - l] * g[j - l],

the Lagrange function attached to j is chi_j = sum_k a(k, j) phi(. - k),
and data y on H is interpolated by s = sum_j y_j chi_j.  Columns a(., j)
are assembled as one convolution of g with its H-masked reflection about
j, so a full column costs two FFTs; single entries go through the compiled
pair-product loop instead.

Everything is exact about the half-space support: g vanishes off H by
construction, hence so do the columns, and the assembled factor matrix is
triangular in the half-space order without any thresholding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from ._accel import pair_product_sums
from .cardinal import DataWindow
from .config import BuildConfig, resolve_radii
from .errors import ConfigError, DimensionMismatchError
from .evalgrid import field_sum
from .kernels import Kernel
from .lattice import HalfSpace, as_index_array, box_points, shell_points
from .symbols import SymbolCoefficients, symbol_from_kernel
from .wienerhopf import FactorConfig, WienerHopfFactor, factorize

__all__ = [
    "SemiCardinalSystem",
    "CholeskyReport",
    "build_semicardinal",
    "sc_coefficient",
    "sc_coefficients",
    "sc_column",
    "sc_lagrange_on_lattice",
    "sc_lagrange_eval",
    "sc_interpolate",
    "schur_norm",
    "cholesky_residual",
    "probe_indices",
]

# relative cutoff when trimming a column box for pointwise evaluation
_COLUMN_TRIM_TOL = 1e-14
# largest window (in points) accepted for dense assembly
_DENSE_CAP = 4096


@dataclass(frozen=True, eq=False)
class SemiCardinalSystem:
    """A kernel bound to a half-space lattice through its factor.

    working_radius is the truncation radius of the factor coefficients;
    columns of the inverse live on boxes of twice that radius.  The two
    dictionaries memoize computed columns and sampled kernel fields and
    must be treated as read-only by callers.
    """

    kernel: Kernel
    halfspace: HalfSpace
    factor: WienerHopfFactor
    sigma: SymbolCoefficients
    working_radius: int
    _columns: dict = field(default_factory=dict, repr=False)
    _fields: dict = field(default_factory=dict, repr=False)


@dataclass(frozen=True)
class CholeskyReport:
    """Dense-window check of the factor against the kernel matrix.

    gram_residual: max |T (G G^t) - I| over interior rows and columns,
    where T is the kernel matrix on the window and G the factor matrix.
    inverse_residual: the same with the directly assembled inverse
    entries a(k, j) in place of G G^t.  strictly_triangular reports
    whether G vanished above the diagonal in the half-space order
    (ordered variant only; None for coordinate half-spaces).
    """

    window_radius: int
    buffer: int
    size: int
    interior_size: int
    gram_residual: float
    inverse_residual: float
    strictly_triangular: bool | None


def build_semicardinal(
    kernel: Kernel,
    halfspace: HalfSpace | None = None,
    config: BuildConfig | None = None,
) -> SemiCardinalSystem:
    """Factor the kernel's symbol over a half-space and wrap the result.

    The default half-space is the coordinate one on the last axis.
    """
    if halfspace is None:
        halfspace = HalfSpace.coordinate(kernel.dim)
    if halfspace.dim != kernel.dim:
        raise DimensionMismatchError(
            f"half-space has dim {halfspace.dim}, kernel has dim {kernel.dim}"
        )
    rs, rc, m = resolve_radii(kernel, config)
    sigma = symbol_from_kernel(kernel, rs)
    factor = factorize(sigma, halfspace, FactorConfig(radius=rc, grid_m=m))
    return SemiCardinalSystem(
        kernel=kernel,
        halfspace=halfspace,
        factor=factor,
        sigma=sigma,
        working_radius=factor.gamma.radius,
    )


def _require_inside(sys: SemiCardinalSystem, pts: np.ndarray, what: str) -> None:
    ok = sys.halfspace.contains_many(pts)
    if not ok.all():
        bad = pts[~ok][0]
        raise ConfigError(f"{what} {tuple(int(v) for v in bad)} lies outside "
                          f"the half-space {sys.halfspace!r}")


# ---------------------------------------------------------------------------
# inverse entries


def sc_coefficients(sys: SemiCardinalSystem, ks, js) -> np.ndarray:
    """Inverse entries a(k, j) for paired stacks of half-space indices.

    Each entry is an explicit pair-product sum over the factor box, walked
    in row-major order; use :func:`sc_column` when a whole column is
    needed.
    """
    d = sys.kernel.dim
    kpts = as_index_array(ks, d)
    jpts = as_index_array(js, d)
    if kpts.shape != jpts.shape:
        raise DimensionMismatchError(
            f"{kpts.shape[0]} row indices against {jpts.shape[0]} column indices"
        )
    _require_inside(sys, kpts, "row index")
    _require_inside(sys, jpts, "column index")
    return pair_product_sums(sys.factor.gamma.coeffs, kpts, jpts, sys.halfspace)


def sc_coefficient(sys: SemiCardinalSystem, k, j) -> float:
    return float(sc_coefficients(sys, [k], [j])[0])


def _column_values(sys: SemiCardinalSystem, j0: np.ndarray) -> np.ndarray:
    g = sys.factor.gamma.coeffs
    n = sys.working_radius
    d = sys.kernel.dim
    # reflection of g about j0, masked to summation indices inside H
    c = np.flip(g).copy()
    lpts = j0 + box_points([-n] * d, [n] * d)
    c[~sys.halfspace.contains_many(lpts).reshape(c.shape)] = 0.0
    col = fftconvolve(c, g, mode="full")
    # the half-space is closed under addition, so entries off H are exact
    # zeros in theory; make them exact in floating point too
    kpts = j0 + box_points([-2 * n] * d, [2 * n] * d)
    col[~sys.halfspace.contains_many(kpts).reshape(col.shape)] = 0.0
    return col


def sc_column(sys: SemiCardinalSystem, j) -> DataWindow:
    """The field a(., j) on its support box around j.

    Coordinate half-spaces reuse one cached field per boundary distance,
    since columns there are translates of each other along the boundary.
    The returned window shares cached storage; do not mutate it.
    """
    d = sys.kernel.dim
    j = as_index_array(j, d)[0]
    _require_inside(sys, j[np.newaxis], "column index")
    n = sys.working_radius
    if sys.halfspace.variant == "coordinate":
        ax = sys.halfspace.axis - 1
        key = int(j[ax])
        rep = np.zeros(d, dtype=np.int64)
        rep[ax] = key
    else:
        key = tuple(int(v) for v in j)
        rep = j
    values = sys._columns.get(key)
    if values is None:
        values = _column_values(sys, rep)
        sys._columns[key] = values
    return DataWindow(j - 2 * n, values)


def _trimmed(window: DataWindow) -> DataWindow:
    """Sub-box carrying all entries above the relative trim cutoff."""
    v = window.values
    mask = np.abs(v) > _COLUMN_TRIM_TOL * np.abs(v).max()
    axes = list(range(v.ndim))
    lo_idx = []
    sl = []
    for a in axes:
        proj = mask.any(axis=tuple(b for b in axes if b != a))
        nz = np.nonzero(proj)[0]
        lo_idx.append(int(nz[0]))
        sl.append(slice(int(nz[0]), int(nz[-1]) + 1))
    return DataWindow(window.lo + np.array(lo_idx), v[tuple(sl)])


def _sampled_field(sys: SemiCardinalSystem, off: np.ndarray, reach: int) -> np.ndarray:
    key = (tuple(int(v) for v in off), int(reach))
    f = sys._fields.get(key)
    if f is None:
        d = sys.kernel.dim
        pts = (off + box_points([-reach] * d, [reach] * d)).astype(float)
        f = sys.kernel.eval_many(pts).reshape((2 * reach + 1,) * d)
        sys._fields[key] = f
    return f


# ---------------------------------------------------------------------------
# Lagrange functions


def sc_lagrange_on_lattice(
    sys: SemiCardinalSystem, j, out_radius: int, center=None
) -> np.ndarray:
    """chi_j(center + t) over the centered lattice box of the given radius.

    center defaults to j itself, which is also the only case whose sampled
    kernel field gets reused across j; the delta property makes the result
    a one at the middle entry and zeros at every other half-space point.
    """
    d = sys.kernel.dim
    j = as_index_array(j, d)[0]
    col = sc_column(sys, j)
    center = j if center is None else as_index_array(center, d)[0]
    reach = out_radius + 2 * sys.working_radius
    f = _sampled_field(sys, center - j, reach)
    out = fftconvolve(f, col.values, mode="valid")
    if out.shape != (2 * out_radius + 1,) * d:
        raise AssertionError("convolution window bookkeeping went wrong")
    return out


def sc_lagrange_eval(sys: SemiCardinalSystem, j, x) -> float | np.ndarray:
    """chi_j at arbitrary points (kernels with off-lattice evaluation)."""
    d = sys.kernel.dim
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    col = _trimmed(sc_column(sys, j))
    out = field_sum(sys.kernel.eval_many, col.values, col.lo, np.atleast_2d(pts))
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# interpolation operator


def sc_interpolate(
    sys: SemiCardinalSystem,
    window: DataWindow,
    x,
    route: str = "coefficient",
) -> float | np.ndarray:
    """Interpolant of windowed half-space data, evaluated at x.

    Window entries at lattice points outside H are ignored; outside the
    window the data is taken to be zero.  Route "coefficient" pushes the
    data through two convolutions with the factor to get kernel-translate
    coefficients; route "lagrange" sums data against Lagrange functions
    and is kept as a slow cross-check.
    """
    if route not in ("coefficient", "lagrange"):
        raise ConfigError(f"unknown interpolation route {route!r}")
    d = sys.kernel.dim
    if window.values.ndim != d:
        raise DimensionMismatchError(
            f"data window has dim {window.values.ndim}, kernel has dim {d}"
        )
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    X = np.atleast_2d(pts)

    inside = sys.halfspace.contains_many(window.points())
    y = np.where(inside.reshape(window.values.shape), window.values, 0.0)

    if route == "lagrange":
        out = np.zeros(X.shape[0])
        for idx in np.argwhere(y != 0.0):
            site = window.lo + idx
            out += y[tuple(idx)] * np.atleast_1d(
                sc_lagrange_eval(sys, site, X)
            )
        return float(out[0]) if single else out

    g = sys.factor.gamma.coeffs
    n = sys.working_radius
    # b[l] = sum_j g[j - l] y[j] on H, then c[k] = sum_l g[k - l] b[l]
    b = fftconvolve(y, np.flip(g), mode="full")
    lo_b = window.lo - n
    lpts = box_points(lo_b, lo_b + np.array(b.shape) - 1)
    b[~sys.halfspace.contains_many(lpts).reshape(b.shape)] = 0.0
    c = fftconvolve(b, g, mode="full")
    out = field_sum(sys.kernel.eval_many, c, lo_b - n, X)
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# probe sets and dense-window diagnostics


def probe_indices(halfspace: HalfSpace, deep: int = 20) -> np.ndarray:
    """Representative column indices: near the boundary, mid-range, deep.

    Coordinate variant: points on the half-space axis at boundary
    distances 0, 1, 5 and ``deep``.  Ordered variant: the origin, its
    first successors, and the order-extreme points of the half-space on
    the boxes of radius 5 and 10.
    """
    d = halfspace.dim
    if halfspace.variant == "coordinate":
        out = np.zeros((4, d), dtype=np.int64)
        out[:, halfspace.axis - 1] = (0, 1, 5, deep)
        return out
    rows = [halfspace.order.sort(halfspace.window(1))[:3]]
    for r in (5, 10):
        shell = shell_points(d, r)
        shell = shell[halfspace.contains_many(shell)]
        ordered = halfspace.order.sort(shell)
        rows.append(ordered[[0, -1]] if d > 1 else ordered[[0]])
    return np.unique(np.concatenate(rows, axis=0), axis=0)


def schur_norm(sys: SemiCardinalSystem, js=None) -> float:
    """Max over probed j of the absolute column sum of the inverse."""
    if js is None:
        js = probe_indices(sys.halfspace)
    js = as_index_array(js, sys.kernel.dim)
    best = 0.0
    for j in js:
        best = max(best, float(np.abs(sc_column(sys, j).values).sum()))
    return best


def _gather_factor_matrix(sys: SemiCardinalSystem, w: np.ndarray) -> np.ndarray:
    g = sys.factor.gamma.coeffs
    n = sys.working_radius
    diffs = w[:, np.newaxis, :] - w[np.newaxis, :, :]
    inbox = np.all(np.abs(diffs) <= n, axis=-1)
    idx = np.clip(diffs + n, 0, 2 * n)
    flat = np.ravel_multi_index(np.moveaxis(idx, -1, 0), g.shape)
    return np.where(inbox, g.ravel()[flat], 0.0)


def cholesky_residual(
    sys: SemiCardinalSystem, window_radius: int, buffer: int | None = None
) -> CholeskyReport:
    """Assemble the dense window system and measure both inverse routes.

    The buffer (default a quarter of the radius) excludes rows and columns
    near the box truncation edge; the genuine half-space boundary stays in.
    """
    buf = buffer if buffer is not None else max(1, window_radius // 4)
    w = sys.halfspace.window(window_radius)
    if len(w) > _DENSE_CAP:
        raise ConfigError(
            f"window of {len(w)} points exceeds the dense cap {_DENSE_CAP}"
        )
    d = sys.kernel.dim
    diffs = (w[:, np.newaxis, :] - w[np.newaxis, :, :]).reshape(-1, d)
    gram = sys.kernel.eval_many(diffs.astype(float)).reshape(len(w), len(w))
    lower = _gather_factor_matrix(sys, w)

    inverse = np.empty((len(w), len(w)))
    for i, j in enumerate(w):
        col = sc_column(sys, j)
        idx = w - col.lo
        shape = np.array(col.values.shape)
        inbox = np.all((idx >= 0) & (idx < shape), axis=1)
        flat = np.ravel_multi_index(np.clip(idx, 0, shape - 1).T, col.values.shape)
        inverse[:, i] = np.where(inbox, col.values.ravel()[flat], 0.0)

    eye = np.eye(len(w))
    interior = np.max(np.abs(w), axis=1) <= window_radius - buf
    sel = np.ix_(interior, interior)
    gram_res = float(np.abs((gram @ (lower @ lower.T) - eye)[sel]).max())
    inv_res = float(np.abs((gram @ inverse - eye)[sel]).max())

    triangular = None
    if sys.halfspace.variant == "ordered":
        # the window comes back sorted ascending, so order-triangularity
        # is plain matrix triangularity, and it must hold exactly
        triangular = not np.triu(lower, 1).any()
    return CholeskyReport(
        window_radius=window_radius,
        buffer=buf,
        size=len(w),
        interior_size=int(interior.sum()),
        gram_residual=gram_res,
        inverse_residual=inv_res,
        strictly_triangular=triangular,
    )
