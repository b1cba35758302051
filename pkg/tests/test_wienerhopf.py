"""Factorization pipeline: splits, closed forms, residuals, inverses."""

import numpy as np
import pytest

import whlattice.kernels as K
import whlattice.symbols as S
import whlattice.wienerhopf as W
from whlattice.errors import (
    DimensionMismatchError,
    ResidualTooLargeError,
    SymbolNotPositiveError,
)
from whlattice.lattice import HalfSpace, LinearOrder, box_points

SQ3 = np.sqrt(3.0)
Q = 2.0 - SQ3  # contraction ratio of the cubic-spline plus factor
G0 = 3.0 - SQ3

from zoo_defs import ZOO_RADII, halfspaces


# ---------------------------------------------------------------------------
# split_plus


def test_split_halves_origin():
    lam = S.SymbolCoefficients(1, 0, np.array([2.5]))
    out = W.split_plus(lam, HalfSpace.coordinate(1))
    assert out.coeffs[0] == 1.25


def test_split_d1_both_halfspace_kinds_agree():
    lam = S.SymbolCoefficients(1, 1, np.array([1.0, 2.0, 1.0]))
    for hs in halfspaces(1):
        out = W.split_plus(lam, hs)
        assert np.array_equal(out.coeffs, [0.0, 1.0, 1.0])


def test_split_coordinate_halves_whole_boundary_slab():
    # weight on (+-1, 0) sits on the k_2 = 0 slab and is halved on BOTH sides
    c = np.zeros((3, 3))
    c[2, 1] = 0.7  # (1, 0)
    c[0, 1] = 0.7  # (-1, 0)
    lam = S.SymbolCoefficients(2, 1, c)
    out = W.split_plus(lam, HalfSpace.coordinate(2))
    assert out.coeffs[2, 1] == 0.35
    assert out.coeffs[0, 1] == 0.35
    # the ordered split instead keeps one side whole and drops the other
    ord_out = W.split_plus(lam, HalfSpace.ordered(LinearOrder.lex(2)))
    assert ord_out.coeffs[2, 1] == 0.7
    assert ord_out.coeffs[0, 1] == 0.0


def test_split_plus_mirror_reconstructs_input_on_grid():
    rng = np.random.default_rng(7)
    half = rng.standard_normal((7, 7))
    lam_arr = half + half[::-1, ::-1]
    lam = S.SymbolCoefficients(2, 3, lam_arr)
    m = 32
    target = S.grid_eval(lam, m).values
    for hs in halfspaces(2):
        plus = S.grid_eval(W.split_plus(lam, hs), m).values
        # mirror evaluation conjugates on the torus for real coefficients
        recon = plus + np.conj(plus)
        assert np.max(np.abs(recon - target)) < 1e-12


def test_split_rejects_asymmetric_input():
    arr = np.array([1.0, 2.0, 1.5])
    with pytest.raises(ValueError, match="asymmetric"):
        W.split_plus(S.SymbolCoefficients(1, 1, arr), HalfSpace.coordinate(1))


def test_split_rejects_dimension_mismatch():
    lam = S.SymbolCoefficients(1, 0, np.array([2.0]))
    with pytest.raises(DimensionMismatchError):
        W.split_plus(lam, HalfSpace.coordinate(2))


# ---------------------------------------------------------------------------
# factorize: closed forms and trivial cases


def test_factorize_unit_symbol_gives_delta():
    for hs in halfspaces(2):
        fac = W.factorize(S.delta_symbol(2), hs, W.FactorConfig(radius=4, grid_m=32))
        expect = np.zeros((9, 9))
        expect[4, 4] = 1.0
        assert np.max(np.abs(fac.gamma.coeffs - expect)) < 1e-15
        assert fac.factorization_residual < 1e-14
        assert fac.support_leak < 1e-14


def test_factorize_cubic_spline_closed_form():
    sig = S.symbol_from_kernel(K.bspline(4), 2)
    fac = W.factorize(
        sig, HalfSpace.coordinate(1), W.FactorConfig(radius=40, grid_m=512)
    )
    c = fac.gamma.radius
    g = fac.gamma.coeffs
    ks = np.arange(0, 41)
    expect = G0 * (-Q) ** ks
    assert np.max(np.abs(g[c:] - expect)) < 1e-13
    assert np.max(np.abs(g[:c])) == 0.0
    assert abs(np.abs(g).sum() - SQ3) < 1e-8
    assert abs(g[c] - G0) < 1e-13
    assert abs(g[c + 1] + G0 * Q) < 1e-13
    assert fac.factorization_residual < 1e-9
    assert fac.gamma.coeffs[c] > 0.0


def test_factorize_rejects_nonpositive_symbol():
    # 0.5 + cos(t) dips to -0.5
    sig = S.SymbolCoefficients(1, 1, np.array([0.5, 0.5, 0.5]))
    with pytest.raises(SymbolNotPositiveError):
        W.factorize(sig, HalfSpace.coordinate(1))


def test_factorize_reports_residual_overflow():
    sig = S.symbol_from_kernel(K.bspline(4), 2)
    cfg = W.FactorConfig(radius=3, grid_m=64, auto_widen=False, residual_tol=1e-10)
    with pytest.raises(ResidualTooLargeError):
        W.factorize(sig, HalfSpace.coordinate(1), cfg)


def test_factorize_widens_truncation_once():
    sig = S.symbol_from_kernel(K.bspline(4), 2)
    cfg = W.FactorConfig(radius=5, grid_m=128, residual_tol=1e-2)
    fac = W.factorize(sig, HalfSpace.coordinate(1), cfg)
    assert fac.gamma.radius == 10


def test_factorize_gaussian_plane_ordered_lex():
    sig = S.symbol_from_kernel(K.gaussian(2, c=1.0), 7)
    fac = W.factorize(
        sig,
        HalfSpace.ordered(LinearOrder.lex(2)),
        W.FactorConfig(radius=40, grid_m=512),
    )
    assert fac.factorization_residual < 1e-8


def test_coefficient_route_matches_grid_route():
    sig = S.symbol_from_kernel(K.bspline(4), 2)
    h1 = HalfSpace.coordinate(1)
    base = W.FactorConfig(radius=20, grid_m=512)
    alt = W.FactorConfig(radius=20, grid_m=512, coefficient_route=True)
    a = W.factorize(sig, h1, base).gamma.coeffs
    b = W.factorize(sig, h1, alt).gamma.coeffs
    assert np.max(np.abs(a - b)) < 1e-12

    sig2 = S.symbol_from_kernel(K.gaussian(2, c=3.0), 7)
    h2 = HalfSpace.ordered(LinearOrder.lex(2))
    base2 = W.FactorConfig(radius=10, grid_m=256)
    alt2 = W.FactorConfig(radius=10, grid_m=256, coefficient_route=True)
    a2 = W.factorize(sig2, h2, base2).gamma.coeffs
    b2 = W.factorize(sig2, h2, alt2).gamma.coeffs
    assert np.max(np.abs(a2 - b2)) < 1e-12


# ---------------------------------------------------------------------------
# verify_factorization


def test_verify_unit_symbol_residual_zero():
    fac = W.factorize(S.delta_symbol(1), HalfSpace.coordinate(1),
                      W.FactorConfig(radius=2, grid_m=16))
    rep = W.verify_factorization(S.delta_symbol(1), fac)
    assert rep.residual < 1e-15
    assert abs(rep.gamma_wiener_sq - 1.0) < 1e-12


def test_verify_cubic_spline_norm_identity():
    # ||W||_W^2 = 3 = ||1/sigma||_W for the cubic spline
    sig = S.symbol_from_kernel(K.bspline(4), 2)
    fac = W.factorize(sig, HalfSpace.coordinate(1),
                      W.FactorConfig(radius=40, grid_m=512))
    rep = W.verify_factorization(sig, fac, m=512)
    assert rep.residual < 1e-9
    assert abs(rep.gamma_wiener_sq - 3.0) < 1e-8
    assert abs(rep.omega_wiener_estimate - 3.0) < 1e-8
    assert rep.gamma_wiener_sq >= rep.omega_wiener_estimate - 1e-10


# ---------------------------------------------------------------------------
# inverse_plus


def test_inverse_plus_of_delta_is_delta():
    fac = W.factorize(S.delta_symbol(1), HalfSpace.coordinate(1),
                      W.FactorConfig(radius=2, grid_m=16))
    inv = W.inverse_plus(fac)
    expect = np.zeros(5)
    expect[2] = 1.0
    assert np.max(np.abs(inv.coeffs - expect)) < 1e-15


def test_inverse_plus_cubic_spline_is_linear_polynomial():
    sig = S.symbol_from_kernel(K.bspline(4), 2)
    fac = W.factorize(sig, HalfSpace.coordinate(1),
                      W.FactorConfig(radius=40, grid_m=512))
    inv = W.inverse_plus(fac)
    c = inv.radius
    assert abs(inv.coeffs[c] - 1.0 / G0) < 1e-12
    assert abs(inv.coeffs[c + 1] - Q / G0) < 1e-12
    assert np.max(np.abs(inv.coeffs[c + 2:])) < 1e-12
    assert np.max(np.abs(inv.coeffs[:c])) == 0.0

    prod = S.multiply(fac.gamma, inv)
    delta = prod.coeffs.copy()
    delta[prod.radius] -= 1.0
    assert np.max(np.abs(delta)) < 1e-10


def test_inverse_plus_round_trip_plane():
    sig = S.symbol_from_kernel(K.gaussian(2, c=3.0), 7)
    fac = W.factorize(sig, HalfSpace.ordered(LinearOrder.graded_lex(2)),
                      W.FactorConfig(radius=32, grid_m=256))
    inv = W.inverse_plus(fac)
    prod = S.multiply(fac.gamma, inv)
    delta = prod.coeffs.copy()
    delta[(prod.radius,) * 2] -= 1.0
    assert np.max(np.abs(delta)) < 1e-10


# ---------------------------------------------------------------------------
# zoo-wide invariants


def test_zoo_residual_and_leak_within_tolerance():
    for kern, rs, rc, m in ZOO_RADII:
        sig = S.symbol_from_kernel(kern, rs)
        for hs in halfspaces(kern.dim):
            fac = W.factorize(sig, hs, W.FactorConfig(radius=rc, grid_m=m))
            assert fac.factorization_residual < 1e-8, (kern, hs)
            assert fac.support_leak < 1e-8, (kern, hs)
            center = (fac.gamma.radius,) * kern.dim
            assert fac.gamma.coeffs[center] > 0.0
            pts = box_points([-fac.gamma.radius] * kern.dim,
                             [fac.gamma.radius] * kern.dim)
            outside = ~hs.contains_many(pts).reshape(fac.gamma.coeffs.shape)
            assert np.max(np.abs(fac.gamma.coeffs[outside])) == 0.0


def test_exponential_kernel_gives_exponential_factor():
    sig = S.symbol_from_kernel(K.bspline(4), 2)
    fac = W.factorize(sig, HalfSpace.coordinate(1),
                      W.FactorConfig(radius=40, grid_m=512))
    c = fac.gamma.radius
    # stay above the float noise floor: |gamma_20| ~ 5e-12
    ks = np.arange(3, 21)
    slope = np.polyfit(ks, np.log(np.abs(fac.gamma.coeffs[c + ks])), 1)[0]
    assert slope < 0.0
    assert abs(-slope - np.log(2.0 + SQ3)) < 0.02 * np.log(2.0 + SQ3)


def test_algebraic_kernel_factor_stays_power_bounded():
    sig = S.symbol_from_kernel(K.gim(2, 2.0), 88)
    fac = W.factorize(sig, HalfSpace.coordinate(2),
                      W.FactorConfig(radius=256, grid_m=2048))
    r = fac.gamma.radius
    pts = box_points([-r, -r], [r, r]).astype(float)
    dist = np.sqrt((pts**2).sum(axis=1))
    stat = np.abs(fac.gamma.coeffs.ravel()) * (1.0 + dist) ** 4
    assert stat[dist >= 2.0].max() < 10.0
