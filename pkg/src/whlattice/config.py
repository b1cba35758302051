"""Default sizing for symbol boxes, coefficient boxes, and grids.

Exponentially decaying kernels certify their own sampling radius through
the decay envelope.  Algebraically decaying ones cannot (the certified
radius for a 1e-14 tail would be astronomically large), so their radii are
pinned here at values where the truncated-symbol error sits below the
verification tolerances used throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError
from .kernels import Kernel, decay_truncation_radius
from .symbols import default_grid_m

__all__ = ["BuildConfig", "resolve_radii"]

# coefficient-box radii for kernels whose symbol decays algebraically
_ALGEBRAIC_COEFF_RADIUS = {1: 1536, 2: 256}
_ALGEBRAIC_SAMPLE_RADIUS = {1: 900, 2: 88}


@dataclass(frozen=True)
class BuildConfig:
    """Radii and grid size for building interpolation systems.

    Any field left as None is filled in per kernel family; see
    :func:`resolve_radii`.  delta_tol bounds the verified defect of the
    convolution identity sigma * omega = delta at build time.
    """

    sample_radius: int | None = None
    coeff_radius: int | None = None
    grid_m: int | None = None
    delta_tol: float = 1e-6


def resolve_radii(kernel: Kernel, config: BuildConfig | None = None):
    """Fill in (sample_radius, coeff_radius, grid_m) for a kernel."""
    cfg = config if config is not None else BuildConfig()
    rs = cfg.sample_radius
    if rs is None:
        if kernel.support_radius is not None:
            rs = kernel.support_radius
        elif kernel.family in ("gim", "polyharmonic"):
            rs = _ALGEBRAIC_SAMPLE_RADIUS.get(kernel.dim)
            if rs is None:
                raise ConfigError(
                    f"no default sampling radius for {kernel.family} in "
                    f"dimension {kernel.dim}; set sample_radius explicitly"
                )
        else:
            rs = decay_truncation_radius(kernel, 1e-15)
    rc = cfg.coeff_radius
    if rc is None:
        if kernel.family in ("gim", "polyharmonic") and kernel.support_radius is None:
            rc = _ALGEBRAIC_COEFF_RADIUS[kernel.dim]
        else:
            rc = 48
    m = cfg.grid_m
    if m is None:
        m = max(default_grid_m(rc), default_grid_m(rs))
    if m < 2 * rc + 1 or m < 2 * rs + 1:
        raise ConfigError(
            f"grid size {m} cannot resolve coefficient radius {rc} and "
            f"sampling radius {rs}"
        )
    if rs <= 0 or rc <= 0:
        raise ConfigError("radii must be positive")
    return int(rs), int(rc), int(m)
