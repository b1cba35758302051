"""Exception types shared across the package."""


class WHLatticeError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatchError(WHLatticeError):
    """An index array or point has the wrong trailing dimension."""


class SymbolNotPositiveError(WHLatticeError):
    """A lattice symbol dipped at or below the positivity floor on the torus.

    Carries enough context to diagnose whether the kernel itself is
    degenerate or the evaluation grid was simply too coarse.
    """

    def __init__(self, min_value: float, floor: float, grid_m: int):
        self.min_value = float(min_value)
        self.floor = float(floor)
        self.grid_m = int(grid_m)
        super().__init__(
            f"symbol minimum {self.min_value:.6e} <= floor {self.floor:.6e} "
            f"on a {self.grid_m}-per-axis torus grid"
        )


class ResidualTooLargeError(WHLatticeError):
    """A factorization residual exceeded its tolerance."""

    def __init__(self, residual: float, tolerance: float):
        self.residual = float(residual)
        self.tolerance = float(tolerance)
        super().__init__(
            f"factorization residual {self.residual:.6e} exceeds "
            f"tolerance {self.tolerance:.6e}"
        )


class CapabilityError(WHLatticeError):
    """An operation was requested that the given kernel cannot support."""


class ConfigError(WHLatticeError):
    """A run configuration is malformed or internally inconsistent."""


class VerificationError(WHLatticeError):
    """A verification routine was invoked with inconsistent arguments."""
