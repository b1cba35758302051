"""Truncated Fourier-coefficient calculus on the d-torus.

A ``SymbolCoefficients`` is a real coefficient field on a centered box
[-N, N]^d; a ``TorusGrid`` holds complex values on the uniform M^d grid
of points exp(2*pi*i*n/M). The transforms between them fix one sign
convention for the whole package:

    u(zeta_n) = sum_k c_k * exp(+2*pi*i * n.k / M)

so ``grid_eval`` is an inverse DFT of the embedded field scaled by M^d
and ``from_grid`` is a forward DFT scaled by 1/M^d. All public symbol
operations (reciprocal, log, multiply, positivity and norms) are built
from these two plus pointwise grid arithmetic.

Coefficient fields stay real; complex values exist only on grids. Every
grid-to-box truncation records the relative mass it discarded, and the
field carries the worst such figure through subsequent operations.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import fftconvolve

from .errors import DimensionMismatchError, SymbolNotPositiveError
from .kernels import Kernel, LatticeSamples, lattice_samples

__all__ = [
    "SymbolCoefficients",
    "TorusGrid",
    "POSITIVITY_FLOOR",
    "default_grid_m",
    "delta_symbol",
    "symbol_from_samples",
    "symbol_from_kernel",
    "grid_eval",
    "from_grid",
    "aliased_coefficients",
    "reciprocal",
    "log_symbol",
    "multiply",
    "min_on_torus",
    "wiener_norm",
    "dump_coefficients_csv",
    "load_coefficients_csv",
]

POSITIVITY_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class SymbolCoefficients:
    """Real Fourier coefficients on the centered box [-radius, radius]^dim.

    ``tail_mass`` is the worst relative coefficient mass discarded by any
    truncation on the way to this field (0 for exactly represented fields).
    """

    dim: int
    radius: int
    coeffs: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        want = (2 * self.radius + 1,) * self.dim
        if self.coeffs.shape != want:
            raise DimensionMismatchError(
                f"coefficient field has shape {self.coeffs.shape}, expected {want}"
            )

    def coeff(self, k) -> float:
        """Coefficient at multi-index k; 0 outside the box."""
        k = np.atleast_1d(np.asarray(k, dtype=np.int64))
        if k.shape != (self.dim,):
            raise DimensionMismatchError(
                f"index has shape {k.shape}, expected ({self.dim},)"
            )
        if np.any(np.abs(k) > self.radius):
            return 0.0
        return float(self.coeffs[tuple(k + self.radius)])

    def symmetry_defect(self) -> float:
        """max |c_k - c_{-k}|."""
        rev = self.coeffs[(slice(None, None, -1),) * self.dim]
        return float(np.max(np.abs(self.coeffs - rev)))

    def __repr__(self):
        return (
            f"SymbolCoefficients(dim={self.dim}, radius={self.radius}, "
            f"wiener={wiener_norm(self):.6g}, tail_mass={self.tail_mass:.3g})"
        )


@dataclass(frozen=True, eq=False)
class TorusGrid:
    """Complex values on the uniform M^d torus grid."""

    dim: int
    m: int
    values: np.ndarray

    def __post_init__(self):
        want = (self.m,) * self.dim
        if self.values.shape != want:
            raise DimensionMismatchError(
                f"grid has shape {self.values.shape}, expected {want}"
            )

    def min_real(self) -> float:
        return float(self.values.real.min())


def default_grid_m(radius: int) -> int:
    """Smallest power of two >= max(8 * radius, 16)."""
    m = 16
    while m < 8 * radius:
        m *= 2
    return m


def delta_symbol(dim: int) -> SymbolCoefficients:
    """The multiplicative unit: coefficient 1 at the origin."""
    return SymbolCoefficients(dim, 0, np.ones((1,) * dim))


def symbol_from_samples(samples: LatticeSamples) -> SymbolCoefficients:
    """Lattice samples become symbol coefficients verbatim."""
    vals = np.asarray(samples.values, dtype=np.float64)
    dim = vals.ndim
    radius = samples.radius
    sym = SymbolCoefficients(dim, radius, vals)
    defect = sym.symmetry_defect()
    scale = max(float(np.abs(vals).max()), 1e-300)
    if defect > 1e-10 * scale:
        raise ValueError(f"lattice samples are not symmetric (defect {defect:.3e})")
    total = float(np.abs(vals).sum()) + samples.tail_bound
    return replace(sym, tail_mass=samples.tail_bound / total if total else 0.0)


def symbol_from_kernel(kernel: Kernel, radius: int) -> SymbolCoefficients:
    return symbol_from_samples(lattice_samples(kernel, radius))


def grid_eval(s: SymbolCoefficients, m: int) -> TorusGrid:
    """Evaluate the trigonometric sum on the M^d grid (exact to roundoff)."""
    if m < 2 * s.radius + 1:
        raise ValueError(
            f"grid size {m} cannot resolve radius {s.radius}; need M >= 2N+1"
        )
    embedded = np.zeros((m,) * s.dim, dtype=np.complex128)
    idx = np.ix_(*[np.arange(-s.radius, s.radius + 1) % m] * s.dim)
    embedded[idx] = s.coeffs
    values = np.fft.ifftn(embedded) * float(m) ** s.dim
    return TorusGrid(s.dim, m, values)


def aliased_coefficients(g: TorusGrid) -> np.ndarray:
    """Full real coefficient array indexed by grid representatives.

    Entry at multi-index n holds the aliased coefficient for the
    representative frequency fftfreq-style: n for n < M/2, n - M otherwise.
    """
    return (np.fft.fftn(g.values) / float(g.m) ** g.dim).real


def from_grid(g: TorusGrid, radius: int) -> SymbolCoefficients:
    """Truncate the grid's coefficient content to a centered box."""
    if radius > (g.m - 1) // 2:
        raise ValueError(
            f"radius {radius} exceeds what an M={g.m} grid distinguishes"
        )
    full = aliased_coefficients(g)
    idx = np.ix_(*[np.arange(-radius, radius + 1) % g.m] * g.dim)
    kept = full[idx].copy()
    total = float(np.abs(full).sum())
    dropped = total - float(np.abs(kept).sum())
    tail = dropped / total if total > 0 else 0.0
    return SymbolCoefficients(g.dim, radius, kept, tail_mass=max(tail, 0.0))


def _positive_real_grid(s: SymbolCoefficients, m: int, floor: float) -> np.ndarray:
    g = grid_eval(s, m)
    lo = g.min_real()
    if lo <= floor:
        raise SymbolNotPositiveError(lo, floor, m)
    return g.values.real


def reciprocal(s: SymbolCoefficients, m: int | None = None,
               radius: int | None = None,
               floor: float = POSITIVITY_FLOOR) -> SymbolCoefficients:
    """Coefficients of 1/s via grid inversion; requires s > floor on the grid."""
    radius = s.radius if radius is None else radius
    m = m or max(default_grid_m(radius), 2 * (2 * s.radius + 1))
    vals = _positive_real_grid(s, m, floor)
    out = from_grid(TorusGrid(s.dim, m, (1.0 / vals).astype(np.complex128)), radius)
    return replace(out, tail_mass=max(out.tail_mass, s.tail_mass))


def log_symbol(s: SymbolCoefficients, m: int | None = None,
               radius: int | None = None,
               floor: float = POSITIVITY_FLOOR) -> SymbolCoefficients:
    """Coefficients of log s via the grid; requires s > floor on the grid."""
    radius = s.radius if radius is None else radius
    m = m or max(default_grid_m(radius), 2 * (2 * s.radius + 1))
    vals = _positive_real_grid(s, m, floor)
    out = from_grid(TorusGrid(s.dim, m, np.log(vals).astype(np.complex128)), radius)
    return replace(out, tail_mass=max(out.tail_mass, s.tail_mass))


def multiply(u: SymbolCoefficients, v: SymbolCoefficients) -> SymbolCoefficients:
    """Exact product: full coefficient convolution on the summed box."""
    if u.dim != v.dim:
        raise DimensionMismatchError(
            f"cannot multiply symbols of dimension {u.dim} and {v.dim}"
        )
    coeffs = fftconvolve(u.coeffs, v.coeffs, mode="full")
    return SymbolCoefficients(
        u.dim, u.radius + v.radius, coeffs,
        tail_mass=max(u.tail_mass, v.tail_mass),
    )


def min_on_torus(s: SymbolCoefficients, m: int | None = None) -> float:
    """Minimum of the symbol's real part over the M^d grid."""
    m = m or max(default_grid_m(s.radius), 2 * (2 * s.radius + 1))
    return grid_eval(s, m).min_real()


def wiener_norm(s: SymbolCoefficients) -> float:
    return float(np.abs(s.coeffs).sum())


# ---------------------------------------------------------------------------
# coefficient dump format: CSV, one row per nonzero entry


def dump_coefficients_csv(s: SymbolCoefficients, fp: io.TextIOBase) -> None:
    """Write nonzero coefficients as k_1,...,k_d,value with 17 digits."""
    header = ",".join(f"k_{i + 1}" for i in range(s.dim)) + ",value"
    fp.write(header + "\n")
    flat = s.coeffs.ravel()
    if not np.any(flat):
        return
    shape = s.coeffs.shape
    for pos in np.nonzero(flat)[0]:
        k = np.unravel_index(pos, shape)
        idx = ",".join(str(int(c) - s.radius) for c in k)
        fp.write(f"{idx},{flat[pos]:.17g}\n")


def load_coefficients_csv(fp: io.TextIOBase) -> SymbolCoefficients:
    """Inverse of dump_coefficients_csv; radius inferred from the indices."""
    header = fp.readline().strip()
    names = header.split(",")
    if names[-1] != "value" or not all(
        n == f"k_{i + 1}" for i, n in enumerate(names[:-1])
    ):
        raise ValueError(f"unrecognized coefficient CSV header: {header!r}")
    dim = len(names) - 1
    entries = []
    for line in fp:
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        entries.append((tuple(int(p) for p in parts[:dim]), float(parts[dim])))
    radius = 0
    for k, _ in entries:
        radius = max(radius, max(abs(c) for c in k))
    coeffs = np.zeros((2 * radius + 1,) * dim)
    for k, v in entries:
        coeffs[tuple(c + radius for c in k)] = v
    return SymbolCoefficients(dim, radius, coeffs)
