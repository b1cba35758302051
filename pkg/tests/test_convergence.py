"""Plus-factor field, interpolant representations, convergence gaps."""

import numpy as np
import pytest

import whlattice.convergence as CV
import whlattice.kernels as K
import whlattice.semicardinal as SC
from whlattice.cardinal import build_cardinal
from whlattice.config import BuildConfig
from whlattice.errors import CapabilityError, ConfigError
from whlattice.lattice import HalfSpace, LinearOrder, ball_points

SQ3 = np.sqrt(3.0)


def build_pair(kern, rs, rc, m, hs=None):
    cfg = BuildConfig(sample_radius=rs, coeff_radius=rc, grid_m=m)
    return build_cardinal(kern, cfg), SC.build_semicardinal(kern, hs, cfg)


@pytest.fixture(scope="module")
def m4_pair():
    return build_pair(K.bspline(4), 2, 40, 512)


@pytest.fixture(scope="module")
def gauss2_pair():
    return build_pair(K.gaussian(2, c=3.0), 7, 32, 256)


@pytest.fixture(scope="module")
def gim1_pair():
    return build_pair(K.gim(1, 1.5), 900, 1536, 16384)


# ---------------------------------------------------------------------------
# the field itself


def test_hat_kernel_field_is_kernel():
    sys = SC.build_semicardinal(K.bspline(2))
    e = CV.eta_function(sys)
    xs = np.linspace(-2.0, 2.0, 17)[:, None]
    assert np.max(np.abs(CV.eta_eval(e, xs) - sys.kernel.eval_many(xs))) == 0.0


def test_cubic_field_value_at_origin(m4_pair):
    _, sc = m4_pair
    e = CV.eta_function(sc)
    g0 = 3.0 - SQ3
    assert abs(CV.eta_eval(e, np.zeros(1)) - 1.0 / g0) < 1e-12


def test_field_bounded_by_mass_times_peak(m4_pair):
    _, sc = m4_pair
    e = CV.eta_function(sc)
    mass = float(np.abs(sc.factor.gamma.coeffs).sum())
    assert CV.eta_sup(e) <= mass * (2.0 / 3.0) + 1e-12


def test_field_rejects_lattice_only_kernel():
    sys = SC.build_semicardinal(
        K.boxspline222(), None,
        BuildConfig(sample_radius=2, coeff_radius=48, grid_m=512),
    )
    with pytest.raises(CapabilityError):
        CV.eta_function(sys)


def test_field_eval_radius_validation(m4_pair):
    _, sc = m4_pair
    with pytest.raises(ConfigError):
        CV.eta_function(sc, eval_radius=0)
    with pytest.raises(ConfigError):
        CV.eta_function(sc, eval_radius=10_000)
    e = CV.eta_function(sc, eval_radius=20)
    assert abs(CV.eta_eval(e, np.zeros(1)) - 1.0 / (3.0 - SQ3)) < 1e-12


# ---------------------------------------------------------------------------
# representation residuals


def test_cubic_chi_representation(m4_pair):
    cs, sc = m4_pair
    e = CV.eta_function(sc)
    assert CV.chi_via_eta(e, cs, CV.default_grid(1, 3.0, 0.1)) < 1e-8


def test_cubic_lagrange_representation(m4_pair):
    _, sc = m4_pair
    e = CV.eta_function(sc)
    assert CV.chij_via_eta(e, sc, [0]) < 1e-9
    assert CV.chij_via_eta(e, sc, [5]) < 1e-8


def test_boundary_lagrange_is_scaled_field(m4_pair):
    # the site-0 Lagrange function collapses to a single field term
    _, sc = m4_pair
    e = CV.eta_function(sc)
    xs = np.linspace(-2.5, 4.0, 27)[:, None]
    chi0 = SC.sc_lagrange_eval(sc, [0], xs)
    g0 = 3.0 - SQ3
    assert np.max(np.abs(chi0 - g0 * CV.eta_eval(e, xs))) < 1e-9


def test_line_representations_across_kernels():
    for kern, rs, rc, m in [
        (K.gaussian(1), 6, 40, 512),
        (K.matern(1, 2.0), 40, 48, 512),
    ]:
        cs, sc = build_pair(kern, rs, rc, m)
        e = CV.eta_function(sc)
        assert CV.chi_via_eta(e, cs) < 1e-7, kern
        assert CV.chij_via_eta(e, sc, [2]) < 1e-7, kern


def test_plane_representations(gauss2_pair):
    cs, sc = gauss2_pair
    e = CV.eta_function(sc)
    assert CV.chi_via_eta(e, cs) < 1e-7
    assert CV.chij_via_eta(e, sc, [0, 5]) < 1e-7


def test_ordered_plane_representations(gauss2_pair):
    cs, _ = gauss2_pair
    for order in (LinearOrder.lex(2), LinearOrder.graded_lex(2)):
        _, sc = build_pair(K.gaussian(2, c=3.0), 7, 32, 256,
                           HalfSpace.ordered(order))
        e = CV.eta_function(sc)
        assert CV.chi_via_eta(e, cs) < 1e-7, order
        assert CV.chij_via_eta(e, sc, [1, 1]) < 1e-7, order


def test_gim_line_representations(gim1_pair):
    cs, sc = gim1_pair
    e = CV.eta_function(sc)
    assert CV.chi_via_eta(e, cs) < 1e-7
    assert CV.chij_via_eta(e, sc, [5]) < 1e-7


def test_grouped_route_matches_nested_route(gauss2_pair):
    _, sc = gauss2_pair
    e = CV.eta_function(sc)
    pts = CV.default_grid(2, 1.5, 0.5)
    w = CV._weights(e)
    nested = CV._eta_combination(e, w, pts, True)
    grouped = CV._eta_combination(e, w, pts, False)
    assert np.max(np.abs(nested - grouped)) < 1e-12


def test_kernel_mismatch_rejected(m4_pair):
    _, sc = m4_pair
    e = CV.eta_function(sc)
    other = build_cardinal(K.gaussian(1),
                           BuildConfig(sample_radius=6, coeff_radius=40,
                                       grid_m=512))
    with pytest.raises(ConfigError):
        CV.chi_via_eta(e, other)


# ---------------------------------------------------------------------------
# convergence gaps


def test_hat_kernel_gap_is_zero():
    sys = SC.build_semicardinal(K.bspline(2))
    cs = build_cardinal(K.bspline(2))
    e = CV.eta_function(sys)
    gap, bound = CV.convergence_gap(e, cs, sys, [3])
    assert gap < 1e-14
    assert bound == 0.0


def test_cubic_gaps_decrease_under_bound(m4_pair):
    cs, sc = m4_pair
    e = CV.eta_function(sc)
    gaps = []
    for j in (0, 2, 5, 10, 20):
        gap, bound = CV.convergence_gap(e, cs, sc, [j])
        assert gap <= bound + 1e-8
        gaps.append(gap)
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-9


def test_gim_line_gap_rate(gim1_pair):
    # the tail bound carries the advertised algebraic rate; the measured
    # gap sits below it at every probe
    cs, sc = gim1_pair
    e = CV.eta_function(sc)
    scaled = []
    for j in (1, 2, 5, 10, 20, 40):
        gap, bound = CV.convergence_gap(e, cs, sc, [j])
        assert gap <= bound + 1e-8
        scaled.append(bound * (1 + j) ** 2)
    assert max(scaled) <= 3.0 * min(scaled)


def test_plane_gap_depends_only_on_depth(gauss2_pair):
    cs, sc = gauss2_pair
    e = CV.eta_function(sc)
    g1, b1 = CV.convergence_gap(e, cs, sc, [7, 3])
    g2, b2 = CV.convergence_gap(e, cs, sc, [0, 3])
    assert abs(g1 - g2) < 1e-10
    assert b1 == b2


def test_ordered_exhausting_bound_shrinks(gauss2_pair):
    cs, _ = gauss2_pair
    _, sc = build_pair(K.gaussian(2, c=3.0), 7, 32, 256,
                       HalfSpace.ordered(LinearOrder.lex(2)))
    e = CV.eta_function(sc)
    prev = np.inf
    for n in range(0, 13, 2):
        jn = CV.exhausting_index(sc.halfspace, n)
        gap, bound = CV.convergence_gap(e, cs, sc, jn)
        assert gap <= bound + 1e-8
        assert bound <= prev
        prev = bound
    assert prev < 1e-12


def test_tail_mass_monotone(m4_pair):
    _, sc = m4_pair
    tails = [CV.gamma_tail(sc.factor, [j]) for j in range(0, 30, 3)]
    assert all(a > b for a, b in zip(tails, tails[1:]))
    assert tails[0] < float(np.abs(sc.factor.gamma.coeffs).sum())


# ---------------------------------------------------------------------------
# exhausting indices


def test_exhausting_index_coordinate():
    h = HalfSpace.coordinate(2)
    for n in range(5):
        assert CV.exhausting_index(h, n).tolist() == [0, n]


def test_exhausting_index_ordered_is_order_max():
    for order in (LinearOrder.lex(2), LinearOrder.graded_lex(2)):
        h = HalfSpace.ordered(order)
        for n in (1, 4, 7):
            jn = CV.exhausting_index(h, n)
            cand = ball_points(2, n)
            cand = cand[h.contains_many(cand)]
            assert np.sqrt((jn.astype(float) ** 2).sum()) <= n
            assert bool(np.all(order.compare_many(jn[None, :], cand) >= 0))


def test_exhausting_index_rejects_negative():
    with pytest.raises(ConfigError):
        CV.exhausting_index(HalfSpace.coordinate(1), -1)
