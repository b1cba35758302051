"""Cardinal and semi-cardinal interpolation on integer lattices.

Builds Lagrange functions for shift-invariant kernels on Z^d and on
half-space sublattices, using Wiener-Hopf factorization of the kernel's
lattice symbol, together with verification tools (brute-force oracles,
decay-rate fits, quadrature identities).
"""

__version__ = "0.1.0"
