"""Kernel catalog: radial and spline kernels with certified decay classes.

Families
--------
gaussian          exp(-c*|x|^2), any dimension
matern            |x|^nu K_nu(|x|) with nu = m - d/2 > 0
gim               generalized inverse multiquadric (c^2 + |x|^2)^(-m), 2m > d
bspline           centered univariate B-spline M_n, d = 1
boxspline222      the C^1 box spline on Z^2 with direction set
                  {e1, e2, e1+e2} doubled; lattice values only
polyharmonic      m-th iterated second-difference of the m-harmonic
                  fundamental solution, 2m > d

Each kernel carries a DecayClass certificate (algebraic or exponential
envelope in the 1-norm) used for truncation-radius selection and tail-mass
reporting. Special-function machinery (`bessel_k`, `bspline_eval`,
`polyharmonic_psi_eval`) is exposed directly for testing against
independent oracles.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.signal import convolve as _convolve

from .errors import CapabilityError, DimensionMismatchError
from .lattice import box_points, shell_points

__all__ = [
    "DecayClass",
    "Kernel",
    "LatticeSamples",
    "gaussian",
    "matern",
    "gim",
    "bspline",
    "boxspline222",
    "polyharmonic",
    "make_kernel",
    "eval_kernel",
    "lattice_samples",
    "bessel_k",
    "bspline_eval",
    "polyharmonic_psi_eval",
    "decay_truncation_radius",
]


# ---------------------------------------------------------------------------
# special functions


def _bessel_k_half_integer(n: int, x: np.ndarray) -> np.ndarray:
    """K_{n+1/2}(x) by its finite closed form, n >= 0."""
    acc = np.zeros_like(x)
    for r in range(n + 1):
        coef = math.factorial(n + r) / (
            math.factorial(r) * math.factorial(n - r) * 2.0**r
        )
        acc += coef * x ** (-float(r))
    return np.sqrt(np.pi / (2.0 * x)) * np.exp(-x) * acc


def _bessel_k_quadrature(nu: float, x: np.ndarray) -> np.ndarray:
    """Trapezoid rule on K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt.

    The integrand extends to an even analytic function of t, so the
    trapezoid rule converges faster than any power of the step; step 0.01
    leaves truncation of the t-range as the only visible error, and the
    range is grown until the integrand is below exp(-45) of its peak.
    """
    xmin = float(np.min(x))
    T = 5.0
    while xmin * math.cosh(T) - nu * T < xmin + 45.0 and T < 300.0:
        T *= 1.5
    n = int(math.ceil(T / 0.01)) + 1
    t = np.linspace(0.0, T, n)
    h = t[1] - t[0]
    cosh_t = np.cosh(t)
    # cosh(nu t) in log form so large nu*t cannot overflow before the
    # exp(-x cosh t) factor kills it
    log_cosh_nu = np.logaddexp(nu * t, -nu * t) - math.log(2.0)
    out = np.empty_like(x, dtype=np.float64)
    for i0 in range(0, x.size, 2048):
        xs = x[i0 : i0 + 2048, np.newaxis]
        vals = np.exp(-xs * cosh_t[np.newaxis, :] + log_cosh_nu[np.newaxis, :])
        sums = vals.sum(axis=1) - 0.5 * (vals[:, 0] + vals[:, -1])
        out[i0 : i0 + 2048] = h * sums
    return out


def bessel_k(nu: float, x):
    """Modified Bessel function of the second kind K_nu(x), x > 0.

    Half-integer nu uses the closed finite form; other orders use
    quadrature of the integral representation.
    """
    nu = float(nu)
    if nu < 0:
        nu = -nu  # K is even in its order
    x_arr = np.asarray(x, dtype=np.float64)
    scalar = x_arr.ndim == 0
    x_arr = np.atleast_1d(x_arr)
    if np.any(x_arr <= 0.0):
        raise ValueError("bessel_k requires x > 0")
    two_nu = 2.0 * nu
    if abs(two_nu - round(two_nu)) < 1e-12 and round(two_nu) % 2 == 1:
        out = _bessel_k_half_integer(int(round(nu - 0.5)), x_arr)
    else:
        out = _bessel_k_quadrature(nu, x_arr)
    return float(out[0]) if scalar else out


def bspline_eval(n: int, x):
    """Centered cardinal B-spline M_n via the Cox-de Boor recurrence.

    M_n is the n-fold convolution of the unit-interval indicator, shifted
    to be even; support is [-n/2, n/2].
    """
    if n < 1:
        raise ValueError("B-spline order must be >= 1")
    t = np.asarray(x, dtype=np.float64) + n / 2.0
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    vals = [
        np.where((t >= i) & (t < i + 1), 1.0, 0.0) for i in range(n)
    ]
    for p in range(2, n + 1):
        vals = [
            ((t - i) * vals[i] + (i + p - t) * vals[i + 1]) / (p - 1)
            for i in range(n - p + 1)
        ]
    out = vals[0]
    return float(out[0]) if scalar else out


def _iterated_difference_stencil(m: int, d: int) -> np.ndarray:
    """Weights of (sum_i Delta_i)^m on [-m, m]^d.

    Delta_i is the second central difference along axis i (weights 1, -2, 1
    at unit shifts). Built by repeated full convolution; entries are exact
    small integers in float storage.
    """
    base = np.zeros((3,) * d)
    center = (1,) * d
    base[center] = -2.0 * d
    for ax in range(d):
        for side in (0, 2):
            idx = list(center)
            idx[ax] = side
            base[tuple(idx)] = 1.0
    out = base
    for _ in range(m - 1):
        out = _convolve(out, base, mode="full", method="direct")
    return out


def _polyharmonic_constant(m: int, d: int) -> float:
    """Magnitude of the classical fundamental-solution normalization."""
    if d % 2 == 0:
        return 1.0 / (
            2.0 ** (2 * m - 1)
            * math.pi ** (d / 2.0)
            * math.factorial(m - 1)
            * math.factorial(m - d // 2)
        )
    return abs(math.gamma(d / 2.0 - m)) / (
        2.0 ** (2 * m) * math.pi ** (d / 2.0) * math.factorial(m - 1)
    )


def _radial_power(rsq: np.ndarray, m: int, d: int) -> np.ndarray:
    """|x|^(2m-d) from |x|^2, with a log factor for even d; 0 at |x| = 0.

    Works elementwise in whatever float type ``rsq`` carries.
    """
    p = 2 * m - d
    if d % 2 == 0:
        out = np.zeros_like(rsq)
        pos = rsq > 0.0
        rp = rsq[pos]
        # r^p ln r = rsq^(p/2) * ln(rsq)/2
        out[pos] = rp ** (p // 2) * np.log(rp) * 0.5
        return out
    return np.sqrt(rsq) ** p


class _PolyharmonicEvaluator:
    """Finite-difference form of the m-harmonic cardinal B-spline.

    The far field is a small difference of large smooth terms, so two
    precautions keep it clean: mirror-image stencil offsets are added in
    pairs (evenness then holds exactly in floating point) and the sum is
    accumulated in extended precision.
    """

    def __init__(self, m: int, d: int):
        if 2 * m <= d:
            raise ValueError("polyharmonic kernel requires 2m > d")
        self.m = int(m)
        self.d = int(d)
        stencil = _iterated_difference_stencil(m, d)
        offsets = box_points([-m] * d, [m] * d)
        weights = stencil.ravel()
        sign = np.zeros(len(offsets), dtype=np.int8)
        for ax in range(d):
            col = np.sign(offsets[:, ax]).astype(np.int8)
            sign = np.where(sign == 0, col, sign)
        plus = (weights != 0.0) & (sign > 0)
        self.center_weight = float(stencil[(m,) * d])
        self.pair_offsets = offsets[plus]
        self.pair_weights = weights[plus]
        mag = _polyharmonic_constant(m, d)
        # orientation convention: scale the fundamental solution so the
        # kernel is positive at the origin (its transform is nonnegative)
        self.c = mag if self._raw(np.zeros((1, d)))[0] > 0.0 else -mag

    def _raw(self, x: np.ndarray) -> np.ndarray:
        xl = x.astype(np.longdouble)
        acc = self.center_weight * _radial_power(
            np.einsum("ij,ij->i", xl, xl), self.m, self.d
        )
        for w, s in zip(self.pair_weights, self.pair_offsets):
            up = _radial_power(
                np.einsum("ij,ij->i", xl + s, xl + s), self.m, self.d
            )
            dn = _radial_power(
                np.einsum("ij,ij->i", xl - s, xl - s), self.m, self.d
            )
            acc += w * (up + dn)
        return acc.astype(np.float64)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.c * self._raw(x)


def polyharmonic_psi_eval(m: int, d: int, x) -> float:
    """Value of the m-harmonic cardinal B-spline at a point of R^d."""
    pts = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if pts.shape[1] != d:
        raise DimensionMismatchError(
            f"point has dimension {pts.shape[1]}, expected {d}"
        )
    return float(_PolyharmonicEvaluator(m, d)(pts)[0])


# ---------------------------------------------------------------------------
# decay certificates


@dataclass(frozen=True)
class DecayClass:
    """Envelope |phi(x)| <= constant * decay(x).

    variant "algebraic": decay(x) = (1 + |x|_2)^(-rate), rate > d.
    variant "exponential": decay(x) = exp(-rate * |x|_1).
    """

    variant: str
    rate: float
    constant: float

    def __post_init__(self):
        if self.variant not in ("algebraic", "exponential"):
            raise ValueError(f"unknown decay variant {self.variant!r}")
        if self.rate <= 0 or self.constant <= 0:
            raise ValueError("decay rate and constant must be positive")

    def envelope(self, pts: np.ndarray) -> np.ndarray:
        if self.variant == "algebraic":
            r = np.sqrt(np.einsum("ij,ij->i", pts, pts))
            return self.constant * (1.0 + r) ** (-self.rate)
        return self.constant * np.exp(-self.rate * np.abs(pts).sum(axis=1))

    def shell_bound(self, dim: int, s: int) -> float:
        """Upper bound for the envelope summed over the |.|_inf = s shell."""
        count = (2 * s + 1) ** dim - max(0, 2 * s - 1) ** dim
        if self.variant == "algebraic":
            # |x|_2 >= |x|_inf = s on the shell
            return count * self.constant * (1.0 + s) ** (-self.rate)
        # |x|_1 >= |x|_inf = s
        return count * self.constant * math.exp(-self.rate * s)

    def tail_bound(self, dim: int, radius: int) -> float:
        """Upper bound for the envelope summed over |j|_inf > radius."""
        total = 0.0
        s = radius + 1
        while True:
            term = self.shell_bound(dim, s)
            total += term
            if self.variant == "exponential":
                # shell counts are polynomials of degree dim-1 with positive
                # coefficients, so their one-step growth is at most
                # ((s+1)/s)^(dim-1); beyond that the series is geometric
                ratio = math.exp(-self.rate) * ((s + 1) / s) ** (dim - 1)
                if ratio < 1.0 and term * ratio / (1.0 - ratio) < 1e-18 * max(
                    total, 1e-300
                ):
                    return total + term * ratio / (1.0 - ratio)
            else:
                if s > 2 * radius + 64 and s > 8:
                    # integral comparison for the rest of the algebraic sum
                    excess = self.rate - dim
                    rest = (
                        2.0
                        * dim
                        * 3.0 ** (dim - 1)
                        * self.constant
                        * s ** (-excess)
                        / excess
                    )
                    return total + rest
            s += 1
            if s > radius + 200_000:
                return total


# ---------------------------------------------------------------------------
# kernel families


@dataclass(frozen=True)
class LatticeSamples:
    """Kernel values on a centered lattice box plus a tail-mass bound."""

    values: np.ndarray  # shape (2*radius+1,)*dim
    radius: int
    tail_bound: float


_BOXSPLINE222_TABLE = {
    (0, 0): 0.5,
    (1, 0): 1.0 / 12.0,
    (-1, 0): 1.0 / 12.0,
    (0, 1): 1.0 / 12.0,
    (0, -1): 1.0 / 12.0,
    (1, 1): 1.0 / 12.0,
    (-1, -1): 1.0 / 12.0,
}


class Kernel:
    """A kernel family instance bound to an ambient dimension.

    Use the module-level factory functions; the constructor only stores
    validated fields. Kernels are immutable and safe to share.
    """

    def __init__(self, family: str, dim: int, params: dict, *,
                 positive_definite: bool, full_eval: bool,
                 support_radius: int | None):
        self.family = family
        self.dim = int(dim)
        self.params = dict(params)
        self.positive_definite = bool(positive_definite)
        self.full_eval = bool(full_eval)
        self.support_radius = support_radius
        if family == "matern":
            self._nu = params["m"] - dim / 2.0
        if family == "polyharmonic":
            self._psi = _PolyharmonicEvaluator(params["m"], dim)

    # -- evaluation ---------------------------------------------------

    def eval_many(self, points) -> np.ndarray:
        """Kernel values at a stack of points, shape (n, dim)."""
        x = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if x.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"points have dimension {x.shape[1]}, kernel has {self.dim}"
            )
        fam = self.family
        if fam == "gaussian":
            c = self.params["c"]
            return np.exp(-c * np.einsum("ij,ij->i", x, x))
        if fam == "matern":
            r = np.sqrt(np.einsum("ij,ij->i", x, x))
            nu = self._nu
            out = np.full(r.shape, 2.0 ** (nu - 1.0) * math.gamma(nu))
            pos = r > 1e-10
            if np.any(pos):
                rp = r[pos]
                out[pos] = rp**nu * bessel_k(nu, rp)
            return out
        if fam == "gim":
            c, mm = self.params["c"], self.params["m"]
            return (c * c + np.einsum("ij,ij->i", x, x)) ** (-mm)
        if fam == "bspline":
            return bspline_eval(self.params["n"], x[:, 0])
        if fam == "boxspline222":
            rounded = np.rint(x)
            if not np.allclose(x, rounded, atol=1e-9):
                raise CapabilityError(
                    "boxspline222 supports lattice-point evaluation only"
                )
            out = np.zeros(x.shape[0])
            for i, p in enumerate(rounded.astype(np.int64)):
                out[i] = _BOXSPLINE222_TABLE.get(tuple(p), 0.0)
            return out
        if fam == "polyharmonic":
            return self._psi(x)
        raise ValueError(f"unknown family {fam!r}")

    def eval(self, x) -> float:
        arr = np.asarray(x, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr[np.newaxis]
        return float(self.eval_many(arr[np.newaxis, :])[0])

    # -- decay certificate ---------------------------------------------

    @cached_property
    def decay(self) -> DecayClass:
        fam, d = self.family, self.dim
        if fam == "gaussian":
            c = self.params["c"]
            return DecayClass("exponential", c, math.exp(c * d / 4.0))
        if fam == "matern":
            # 1-norm rate 0.9/sqrt(d) leaves e^{-0.1 r} headroom over the
            # true e^{-r} envelope to absorb the polynomial factor
            rate = 0.9 / math.sqrt(d)
            r = np.linspace(0.0, 80.0, 1601)
            vals = self.eval_many(
                np.concatenate([r[:, None], np.zeros((r.size, d - 1))], axis=1)
            )
            c0 = 1.05 * float(np.max(vals * np.exp(0.9 * r)))
            return DecayClass("exponential", rate, c0)
        if fam == "gim":
            c, mm = self.params["c"], self.params["m"]
            return DecayClass(
                "algebraic", 2.0 * mm, ((1.0 + c * c) / (c * c)) ** mm
            )
        if fam == "bspline":
            n = self.params["n"]
            return DecayClass("exponential", 1.0, math.exp(n / 2.0))
        if fam == "boxspline222":
            return DecayClass("exponential", 1.0, math.exp(2.0))
        if fam == "polyharmonic":
            mm = self.params["m"]
            if d == 1:
                # compactly supported on [-m, m]
                peak = abs(self.eval(np.zeros(1)))
                return DecayClass("exponential", 1.0, 1.05 * peak * math.exp(mm))
            rate = float(d + 2)
            dirs = [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (2.0, 1.0)]
            best = 0.0
            for u in dirs:
                u = np.asarray(u) / np.hypot(*u)
                radii = np.arange(0.0, 12.01, 0.25)
                pts = radii[:, None] * np.pad(
                    u[None, :], ((0, 0), (0, d - 2))
                )
                vals = np.abs(self.eval_many(pts))
                best = max(best, float(np.max(vals * (1.0 + radii) ** rate)))
            return DecayClass("algebraic", rate, 1.5 * best)
        raise ValueError(f"unknown family {fam!r}")

    def __repr__(self):
        ps = ", ".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"Kernel({self.family}, dim={self.dim}, {ps})"


# -- factories ----------------------------------------------------------


def gaussian(dim: int, c: float = 1.0) -> Kernel:
    if c <= 0:
        raise ValueError("gaussian shape c must be positive")
    return Kernel("gaussian", dim, {"c": float(c)},
                  positive_definite=True, full_eval=True, support_radius=None)


def matern(dim: int, m: float) -> Kernel:
    if 2.0 * m <= dim:
        raise ValueError("matern requires m > d/2")
    return Kernel("matern", dim, {"m": float(m)},
                  positive_definite=True, full_eval=True, support_radius=None)


def gim(dim: int, m: float, c: float = 1.0) -> Kernel:
    """Generalized inverse multiquadric (c^2 + |x|^2)^(-m)."""
    if 2.0 * m <= dim:
        raise ValueError("gim requires 2m > d")
    if c <= 0:
        raise ValueError("gim shape c must be positive")
    return Kernel("gim", dim, {"m": float(m), "c": float(c)},
                  positive_definite=True, full_eval=True, support_radius=None)


def bspline(n: int) -> Kernel:
    """Centered univariate B-spline M_n; positive definite for even n."""
    if n < 2:
        raise ValueError("bspline order must be >= 2")
    return Kernel("bspline", 1, {"n": int(n)},
                  positive_definite=(n % 2 == 0), full_eval=True,
                  support_radius=(int(n) + 1) // 2)


def boxspline222() -> Kernel:
    return Kernel("boxspline222", 2, {},
                  positive_definite=True, full_eval=False, support_radius=2)


def polyharmonic(dim: int, m: int) -> Kernel:
    if 2 * m <= dim:
        raise ValueError("polyharmonic requires 2m > d")
    return Kernel("polyharmonic", dim, {"m": int(m)},
                  positive_definite=True, full_eval=True,
                  support_radius=(int(m) if dim == 1 else None))


_FACTORIES = {
    "gaussian": lambda dim, params: gaussian(dim, **params),
    "matern": lambda dim, params: matern(dim, **params),
    "gim": lambda dim, params: gim(dim, **params),
    "bspline": lambda dim, params: bspline(**params),
    "boxspline222": lambda dim, params: boxspline222(),
    "polyharmonic": lambda dim, params: polyharmonic(dim, **params),
}


def make_kernel(family: str, dim: int, params: dict | None = None) -> Kernel:
    """Construct a kernel from its config description."""
    if family not in _FACTORIES:
        raise ValueError(
            f"unknown kernel family {family!r}; expected one of "
            f"{sorted(_FACTORIES)}"
        )
    kernel = _FACTORIES[family](dim, dict(params or {}))
    if kernel.dim != dim:
        raise DimensionMismatchError(
            f"family {family} produced dimension {kernel.dim}, config said {dim}"
        )
    return kernel


# -- lattice-side operations ---------------------------------------------


def eval_kernel(kernel: Kernel, x) -> float:
    return kernel.eval(x)


def lattice_samples(kernel: Kernel, radius: int) -> LatticeSamples:
    """Kernel values on [-radius, radius]^d with a beyond-box tail bound."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    pts = box_points([-radius] * kernel.dim, [radius] * kernel.dim)
    vals = kernel.eval_many(pts).reshape((2 * radius + 1,) * kernel.dim)
    if kernel.support_radius is not None:
        # compact support: the rest of the tail is a finite sum, take it exactly
        tail = sum(
            float(np.abs(kernel.eval_many(shell_points(kernel.dim, s))).sum())
            for s in range(radius + 1, kernel.support_radius + 1)
        )
    else:
        tail = kernel.decay.tail_bound(kernel.dim, radius)
    return LatticeSamples(values=vals, radius=radius, tail_bound=tail)


def decay_truncation_radius(kernel: Kernel, tail_tolerance: float,
                            max_radius: int = 8192) -> int:
    """Smallest box radius whose actual beyond-box tail stays below tolerance.

    Sums |phi| over infinity-norm shells out to an adaptive cap and bounds
    the rest with the kernel's decay certificate. Compactly supported
    kernels return their support radius outright.
    """
    if tail_tolerance <= 0:
        raise ValueError("tail_tolerance must be positive")
    if kernel.support_radius is not None:
        return kernel.support_radius

    cap = 64
    while True:
        remainder = kernel.decay.tail_bound(kernel.dim, cap)
        if remainder < 0.1 * tail_tolerance or cap >= max_radius:
            break
        cap = min(2 * cap, max_radius)

    # per-shell |phi| sums, with shells batched into large eval calls
    shell_sums = np.zeros(cap + 1)
    batch, batch_shells = [], []
    for s in range(1, cap + 1):
        pts = shell_points(kernel.dim, s)
        batch.append(pts)
        batch_shells.append(s)
        if sum(p.shape[0] for p in batch) >= 1 << 20 or s == cap:
            vals = np.abs(kernel.eval_many(np.concatenate(batch, axis=0)))
            pos = 0
            for p, sh in zip(batch, batch_shells):
                shell_sums[sh] = vals[pos : pos + p.shape[0]].sum()
                pos += p.shape[0]
            batch, batch_shells = [], []
    # tail(R) = sum of shells beyond R plus the certified remainder
    suffix = np.concatenate([np.cumsum(shell_sums[::-1])[::-1][1:], [0.0]])
    tails = suffix + remainder
    ok = np.nonzero(tails < tail_tolerance)[0]
    if ok.size == 0:
        warnings.warn(
            f"truncation radius capped at {max_radius}; tail bound "
            f"{tails[-1]:.3e} still above tolerance {tail_tolerance:.3e}"
        )
        return max_radius
    return int(ok[0])
