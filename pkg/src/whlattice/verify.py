"""Independent cross-checks for the factorization machinery.

Everything here deliberately avoids the production code paths: dense
window solves go through LU with partial pivoting, decay rates come from
log-space least squares on measured magnitudes, and the transform-side
quadrature rebuilds interpolation functionals from closed-form Fourier
transforms.  Agreement between these routes and the coefficient routes
is what the verification reports certify.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.linalg import LinAlgWarning, get_lapack_funcs, lu_factor, lu_solve
from scipy.special import erfc

from .cardinal import CardinalSystem
from .errors import CapabilityError, ConfigError, VerificationError
from .kernels import Kernel
from .lattice import as_index_array, centered_box
from .semicardinal import SemiCardinalSystem, sc_coefficients

__all__ = [
    "DecayFit",
    "FiniteSectionResult",
    "NativeQuadratureSpec",
    "fit_decay",
    "finite_section_solve",
    "oracle_compare",
    "kernel_transform",
    "native_quadrature",
    "fundamental_identity_check",
]

_DENSE_CAP = 4096
_NOISE_FLOOR = 1e-13


# ---------------------------------------------------------------------------
# decay-rate fitting


@dataclass(frozen=True)
class DecayFit:
    """Least-squares decay fit of measured coefficient magnitudes.

    ``fitted_rate`` is the slope of log|v| against log(1 + dist)
    (algebraic) or against dist (exponential), negated so faster decay
    reads as a larger rate.  ``verdict`` records whether the fit
    undershoots a claimed rate by more than the slack; theoretical decay
    statements are one-sided, so overshooting is always consistent.
    """

    model: str
    fitted_rate: float
    r_squared: float
    sample_range: tuple[float, float]
    verdict: str


def fit_decay(values, model: str, claimed_rate: float | None = None,
              dist=None, floor: float = _NOISE_FLOOR,
              slack: float = 0.05) -> DecayFit:
    if model not in ("algebraic", "exponential"):
        raise ConfigError(f"unknown decay model {model!r}")
    v = np.abs(np.asarray(values, dtype=float))
    d = np.arange(v.shape[0], dtype=float) if dist is None \
        else np.asarray(dist, dtype=float)
    if d.shape != v.shape:
        raise ConfigError("distances and values must align")
    keep = v > floor
    if int(keep.sum()) < 8:
        raise ConfigError(
            f"need at least 8 samples above the noise floor, have {int(keep.sum())}"
        )
    x = np.log1p(d[keep]) if model == "algebraic" else d[keep]
    y = np.log(v[keep])
    slope, intercept = np.polyfit(x, y, 1)
    fitted = -float(slope)
    res = y - (slope * x + intercept)
    spread = float(y.var())
    r2 = 1.0 if spread == 0.0 else 1.0 - float(res.var()) / spread
    r2 = min(1.0, max(0.0, r2))
    if claimed_rate is None:
        verdict = "consistent" if fitted > 0.0 else "violated"
    else:
        verdict = "consistent" if fitted >= claimed_rate * (1.0 - slack) \
            else "violated"
    return DecayFit(model, fitted, r2,
                    (float(d[keep].min()), float(d[keep].max())), verdict)


# ---------------------------------------------------------------------------
# dense window solves


@dataclass(frozen=True)
class FiniteSectionResult:
    coefficients: np.ndarray
    residual: float
    condition: float


def finite_section_solve(kernel: Kernel, window, rhs) -> FiniteSectionResult:
    """Direct solve of the kernel's value matrix on a lattice window.

    The window is any point list; the matrix is [phi(j - k)] over it.
    LU with partial pivoting; the one-norm condition estimate guards
    against quietly meaningless solutions.
    """
    pts = as_index_array(window, kernel.dim)
    n = pts.shape[0]
    if n > _DENSE_CAP:
        raise ConfigError(f"window has {n} sites, dense cap is {_DENSE_CAP}")
    b = np.asarray(rhs, dtype=float)
    if b.shape[0] != n:
        raise ConfigError("right-hand side length does not match the window")
    diffs = (pts[:, None, :] - pts[None, :, :]).reshape(-1, kernel.dim)
    t_mat = kernel.eval_many(diffs.astype(float)).reshape(n, n)
    with warnings.catch_warnings():
        # exact singularity surfaces through rcond below
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(t_mat)
    gecon = get_lapack_funcs("gecon", (t_mat,))
    rcond, _ = gecon(lu, np.linalg.norm(t_mat, 1))
    if rcond < 1e-14:
        cond = 1.0 / rcond if rcond > 0 else math.inf
        raise VerificationError(
            f"window matrix is numerically singular "
            f"(condition estimate {cond:.3e})"
        )
    coef = lu_solve((lu, piv), b)
    residual = float(np.max(np.abs(t_mat @ coef - b)))
    return FiniteSectionResult(coef, residual, float(1.0 / rcond))


def _interior_mask(pts: np.ndarray, radius: int, buffer: int) -> np.ndarray:
    return np.max(np.abs(pts), axis=1) <= radius - buffer


def oracle_compare(system, window_radius: int, buffer: int | None = None) -> float:
    """Deviation of factorization coefficients from a dense window solve.

    Interior rows and columns only: the dense window truncates the
    lattice, so sites near the box edge carry truncation error by
    construction and are not compared.
    """
    if buffer is None:
        buffer = max(1, window_radius // 4)
    if not 0 < buffer <= window_radius:
        raise ConfigError(f"buffer must lie in 1..{window_radius}, got {buffer}")
    if not isinstance(system, (CardinalSystem, SemiCardinalSystem)):
        raise ConfigError(f"unsupported system type {type(system).__name__}")
    kernel = system.kernel
    if isinstance(system, SemiCardinalSystem):
        pts = system.halfspace.window(window_radius)
        inner = np.nonzero(_interior_mask(pts, window_radius, buffer))[0]
        rhs = np.zeros((pts.shape[0], inner.shape[0]))
        rhs[inner, np.arange(inner.shape[0])] = 1.0
        sol = finite_section_solve(kernel, pts, rhs)
        ks = np.repeat(pts[inner], inner.shape[0], axis=0)
        js = np.tile(pts[inner], (inner.shape[0], 1))
        ours = sc_coefficients(system, ks, js).reshape(
            inner.shape[0], inner.shape[0]
        )
        dense = sol.coefficients[np.ix_(inner, np.arange(inner.shape[0]))]
        return float(np.max(np.abs(ours - dense)))
    pts = centered_box(kernel.dim, window_radius)
    rhs = np.zeros(pts.shape[0])
    rhs[(pts == 0).all(axis=1)] = 1.0
    sol = finite_section_solve(kernel, pts, rhs)
    # stored coefficients end at omega.radius; beyond it there is
    # nothing of ours to compare against
    reach = min(window_radius - buffer, system.omega.radius)
    inner = _interior_mask(pts, reach, 0)
    idx = pts[inner] + system.omega.radius
    ours = system.omega.coeffs[tuple(idx.T)]
    return float(np.max(np.abs(ours - sol.coefficients[inner])))


# ---------------------------------------------------------------------------
# transform-side quadrature

# closed-form transforms, d = 1:
#   gaussian  e^{-c x^2}        ->  sqrt(pi/c) e^{-t^2/(4c)}
#   matern    |x|^nu K_nu(|x|)  ->  sqrt(pi) Gamma(m) 2^{m-1/2} (1+t^2)^{-m},
# nu = m - 1/2; both checked against phi(0) by inverse integration.


def kernel_transform(kernel: Kernel, ts) -> np.ndarray:
    if kernel.dim != 1:
        raise CapabilityError("closed-form transforms are one-dimensional here")
    t = np.asarray(ts, dtype=float)
    if kernel.family == "gaussian":
        c = kernel.params["c"]
        return np.sqrt(np.pi / c) * np.exp(-t * t / (4.0 * c))
    if kernel.family == "matern":
        m = kernel.params["m"]
        rho = math.sqrt(math.pi) * math.gamma(m) * 2.0 ** (m - 0.5)
        return rho * (1.0 + t * t) ** (-m)
    raise CapabilityError(
        f"no closed-form transform for kernel {kernel.family!r}"
    )


def _transform_tail(kernel: Kernel, half_range: float) -> float:
    """Integral of the transform over t > half_range."""
    if kernel.family == "gaussian":
        c = kernel.params["c"]
        return float(np.pi * erfc(half_range / (2.0 * math.sqrt(c))))
    m = kernel.params["m"]
    rho = math.sqrt(math.pi) * math.gamma(m) * 2.0 ** (m - 0.5)
    if m == 1.0:
        return rho * (math.pi / 2.0 - math.atan(half_range))
    val, _ = quad(lambda t: (1.0 + t * t) ** (-m), half_range, np.inf)
    return rho * float(val)


@dataclass(frozen=True)
class NativeQuadratureSpec:
    """Trapezoid rule over |t| <= half_range for transform-side integrals.

    The default step resolves oscillations e^{i nu t} up to |nu| of a
    few hundred; identity checks evaluate at the declared step and at
    half of it and refuse to report an unconverged value.
    """

    kernel: Kernel
    half_range: float
    step: float


def native_quadrature(kernel: Kernel, half_range: float | None = None,
                      step: float | None = None) -> NativeQuadratureSpec:
    if kernel.dim != 1 or kernel.family not in ("gaussian", "matern"):
        raise CapabilityError(
            "native-space quadrature needs a 1-d kernel with a "
            "closed-form transform"
        )
    if half_range is None:
        if kernel.family == "gaussian":
            c = kernel.params["c"]
            # e^{-T^2/4c} below 1e-16 leaves the tail to roundoff
            half_range = 2.0 * math.sqrt(c * math.log(1e16))
        else:
            # algebraic tail handled by the explicit correction term
            half_range = 2048.0
    if step is None:
        step = 1.0 / 512.0
    if half_range <= 0 or step <= 0 or step > half_range:
        raise ConfigError("quadrature range and step must be positive")
    return NativeQuadratureSpec(kernel, float(half_range), float(step))


def _trig_sum(freqs: np.ndarray, weights: np.ndarray,
              ts: np.ndarray) -> np.ndarray:
    """sum_k w_k e^{i f_k t} on a 1-d grid.

    Lattice sums have unit-spaced frequencies, so the sum is a polynomial
    in e^{it} and Horner evaluation avoids one exponential per term; the
    generic outer-product path stays for anything else.
    """
    if freqs.shape[0] > 1 and np.allclose(np.diff(freqs), 1.0,
                                          rtol=0.0, atol=1e-12):
        z = np.exp(1j * ts)
        acc = np.full(ts.shape[0], complex(weights[-1]))
        for w in weights[-2::-1]:
            acc *= z
            acc += w
        return acc * np.exp(1j * freqs[0] * ts)
    out = np.empty(ts.shape[0], dtype=complex)
    block = max(1, (1 << 22) // max(freqs.shape[0], 1))
    for start in range(0, ts.shape[0], block):
        chunk = ts[start:start + block]
        out[start:start + block] = (
            np.exp(1j * np.outer(chunk, freqs)) @ weights.astype(complex)
        )
    return out


def _quadrature_once(spec: NativeQuadratureSpec, step: float,
                     freqs: np.ndarray, weights: np.ndarray,
                     squared: bool) -> float:
    ts = np.arange(-spec.half_range, spec.half_range + step / 2, step)
    poly = _trig_sum(freqs, weights, ts)
    if squared:
        poly = (poly * np.conj(poly)).real
        dc = float(np.sum(weights * weights))
    else:
        dc = float(np.sum(weights[np.abs(freqs) < 1e-12]))
    integrand = kernel_transform(spec.kernel, ts) * poly
    value = float(np.trapezoid(integrand, dx=step).real)
    value += 2.0 * dc * _transform_tail(spec.kernel, spec.half_range)
    return value / (2.0 * math.pi)


def _converged_quadrature(spec, freqs, weights, squared) -> float:
    coarse = _quadrature_once(spec, spec.step, freqs, weights, squared)
    fine = _quadrature_once(spec, spec.step / 2, freqs, weights, squared)
    if abs(fine - coarse) > 1e-6 * max(1.0, abs(fine)):
        raise VerificationError(
            f"quadrature unstable under step halving "
            f"({coarse:.9e} vs {fine:.9e}); use a smaller step"
        )
    return coarse


def fundamental_identity_check(spec: NativeQuadratureSpec, system,
                               j=None, x0: float = 0.5,
                               f: str = "kernel") -> float:
    """|transform-side inner product - coefficient-side sum|.

    The native-space inner product of f with the interpolation function
    equals the coefficient sum over f's lattice values.  f is either a
    kernel translate phi(. - x0) or, for the full-lattice system, the
    cardinal function itself (whose inner product with itself is the
    center coefficient).
    """
    kernel = spec.kernel
    if not kernel.positive_definite:
        raise CapabilityError("the identity needs a positive definite kernel")
    if (kernel.family, kernel.dim, kernel.params) != (
        system.kernel.family, system.kernel.dim, system.kernel.params
    ):
        raise ConfigError("system kernel differs from the quadrature kernel")
    if j is not None:
        if not isinstance(system, SemiCardinalSystem):
            raise ConfigError("a site j only applies to a half-space system")
        if f != "kernel":
            raise ConfigError("the half-space check supports f='kernel' only")
        from .semicardinal import sc_column

        col = sc_column(system, j)
        ks = np.arange(col.lo[0], col.lo[0] + col.values.shape[0])
        weights = col.values
    else:
        if not isinstance(system, CardinalSystem):
            raise ConfigError("without j the system must be full-lattice")
        r = system.omega.radius
        ks = np.arange(-r, r + 1)
        weights = system.omega.coeffs

    if f == "kernel":
        freqs = ks.astype(float) - x0
        lhs = _converged_quadrature(spec, freqs, weights, squared=False)
        rhs = float(weights @ kernel.eval_many((ks - x0).astype(float)[:, None]))
    elif f == "lagrange":
        lhs = _converged_quadrature(spec, ks.astype(float), weights,
                                    squared=True)
        chi_at = np.empty(ks.shape[0])
        for i, k in enumerate(ks):
            shift = (ks - k).astype(float)[:, None]
            chi_at[i] = float(weights @ kernel.eval_many(shift))
        rhs = float(weights @ chi_at)
    else:
        raise ConfigError(f"unknown test function {f!r}")
    return abs(lhs - rhs)
