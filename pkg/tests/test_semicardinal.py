"""Half-space interpolation: inverse entries, Lagrange family, operator."""

import numpy as np
import pytest

import whlattice.semicardinal as SC
import whlattice.kernels as K
from whlattice._accel import _pair_sums_numpy, pair_product_sums
from whlattice.cardinal import DataWindow, build_cardinal
from whlattice.config import BuildConfig
from whlattice.errors import ConfigError
from whlattice.lattice import HalfSpace, LinearOrder, box_points

SQ3 = np.sqrt(3.0)
Q = 2.0 - SQ3


def build(kern, rs, rc, m, hs=None):
    return SC.build_semicardinal(
        kern, hs, BuildConfig(sample_radius=rs, coeff_radius=rc, grid_m=m)
    )


@pytest.fixture(scope="module")
def m4_halfline():
    return build(K.bspline(4), 2, 40, 512)


@pytest.fixture(scope="module")
def gauss_plane():
    return build(K.gaussian(2, c=3.0), 7, 32, 256)


@pytest.fixture(scope="module")
def gauss_plane_lex():
    return build(K.gaussian(2, c=3.0), 7, 32, 256,
                 HalfSpace.ordered(LinearOrder.lex(2)))


def delta_defect(sys, j, radius=8):
    field = SC.sc_lagrange_on_lattice(sys, j, radius)
    field[(radius,) * sys.kernel.dim] -= 1.0
    pts = np.asarray(j) + box_points([-radius] * sys.kernel.dim,
                                     [radius] * sys.kernel.dim)
    keep = sys.halfspace.contains_many(pts).reshape(field.shape)
    return float(np.abs(field[keep]).max())


# ---------------------------------------------------------------------------
# inverse entries


def test_hat_kernel_inverse_is_identity():
    sys2 = SC.build_semicardinal(K.bspline(2))
    ks = np.array([[0], [1], [4], [4]])
    js = np.array([[0], [1], [4], [7]])
    vals = SC.sc_coefficients(sys2, ks, js)
    assert np.array_equal(vals, [1.0, 1.0, 1.0, 0.0])


def test_cubic_closed_forms(m4_halfline):
    g0sq = 12.0 - 6.0 * SQ3
    assert abs(SC.sc_coefficient(m4_halfline, [0], [0]) - g0sq) < 1e-10
    assert abs(SC.sc_coefficient(m4_halfline, [1], [0]) + Q * g0sq) < 1e-10
    assert abs(SC.sc_coefficient(m4_halfline, [1], [1]) - (168.0 - 96.0 * SQ3)) < 1e-10
    # diagonal entries climb to the full-lattice center coefficient
    assert abs(SC.sc_coefficient(m4_halfline, [20], [20]) - SQ3) < 1e-10


def test_entries_rejected_outside_halfspace(m4_halfline):
    with pytest.raises(ConfigError):
        SC.sc_coefficient(m4_halfline, [-1], [0])
    with pytest.raises(ConfigError):
        SC.sc_coefficient(m4_halfline, [0], [-3])


def test_column_matches_pair_route(m4_halfline):
    col = SC.sc_column(m4_halfline, [3])
    ks = np.arange(0, 30)[:, None]
    pair = SC.sc_coefficients(m4_halfline, ks, np.full((30, 1), 3))
    gathered = col.values[ks[:, 0] - col.lo[0]]
    assert np.max(np.abs(pair - gathered)) < 1e-12


def test_column_matches_pair_route_plane(gauss_plane_lex):
    rng = np.random.default_rng(3)
    w = gauss_plane_lex.halfspace.window(10)
    js = w[rng.integers(0, len(w), 6)]
    for j in js:
        col = SC.sc_column(gauss_plane_lex, j)
        ks = w[rng.integers(0, len(w), 40)]
        idx = ks - col.lo
        gathered = col.values[idx[:, 0], idx[:, 1]]
        pair = SC.sc_coefficients(gauss_plane_lex, ks, np.tile(j, (40, 1)))
        assert np.max(np.abs(pair - gathered)) < 1e-12


def test_symmetry_thousand_random_pairs(gauss_plane, gauss_plane_lex, m4_halfline):
    rng = np.random.default_rng(7)
    for sys in (gauss_plane, gauss_plane_lex, m4_halfline):
        w = sys.halfspace.window(12)
        sel = rng.integers(0, len(w), size=(1000, 2))
        akj = SC.sc_coefficients(sys, w[sel[:, 0]], w[sel[:, 1]])
        ajk = SC.sc_coefficients(sys, w[sel[:, 1]], w[sel[:, 0]])
        assert np.max(np.abs(akj - ajk)) < 1e-10


def test_numpy_backend_agrees_with_dispatch(gauss_plane):
    rng = np.random.default_rng(1)
    w = gauss_plane.halfspace.window(8)
    sel = rng.integers(0, len(w), size=(50, 2))
    g = gauss_plane.factor.gamma.coeffs
    fallback = _pair_sums_numpy(g, w[sel[:, 0]], w[sel[:, 1]],
                                gauss_plane.halfspace)
    active = pair_product_sums(g, w[sel[:, 0]], w[sel[:, 1]],
                               gauss_plane.halfspace)
    assert np.max(np.abs(fallback - active)) < 1e-13


def test_boundary_translation_invariance(gauss_plane):
    # shifting parallel to the boundary leaves entries unchanged
    ks = np.array([[2, 3], [0, 0], [-4, 1], [5, 7]])
    js = np.array([[0, 1], [1, 2], [2, 0], [-1, 4]])
    shift = np.array([9, 0])
    base = SC.sc_coefficients(gauss_plane, ks, js)
    moved = SC.sc_coefficients(gauss_plane, ks + shift, js + shift)
    assert np.max(np.abs(base - moved)) < 1e-10


def test_deep_entries_match_full_lattice(m4_halfline):
    sysc = build_cardinal(K.bspline(4),
                          BuildConfig(sample_radius=2, coeff_radius=40,
                                      grid_m=512))
    c = sysc.omega.radius
    for r in range(0, 6):
        deep = SC.sc_coefficient(m4_halfline, [20 + r], [20])
        assert abs(deep - sysc.omega.coeffs[c + r]) < 1e-9


# ---------------------------------------------------------------------------
# Lagrange family


def test_delta_conditions_across_probes(m4_halfline, gauss_plane,
                                        gauss_plane_lex):
    for sys in (m4_halfline, gauss_plane, gauss_plane_lex):
        for j in SC.probe_indices(sys.halfspace, deep=10):
            assert delta_defect(sys, j) < 1e-7, (sys.kernel, j)


def test_delta_conditions_graded(gauss_plane):
    sys = build(K.gaussian(2, c=3.0), 7, 32, 256,
                HalfSpace.ordered(LinearOrder.graded_lex(2)))
    for j in SC.probe_indices(sys.halfspace, deep=10):
        assert delta_defect(sys, j) < 1e-7, j


def test_hat_kernel_lagrange_is_shifted_kernel():
    sys2 = SC.build_semicardinal(K.bspline(2))
    xs = np.linspace(-1.0, 4.0, 21)[:, None]
    vals = SC.sc_lagrange_eval(sys2, [2], xs)
    assert np.max(np.abs(vals - sys2.kernel.eval_many(xs - 2.0))) < 1e-15


def test_lagrange_translation_symmetry(gauss_plane):
    # coordinate half-space: chi at (j', j_d) is chi at (0, j_d) shifted
    rng = np.random.default_rng(4)
    xs = rng.uniform(-2.0, 2.0, size=(9, 2))
    a = SC.sc_lagrange_eval(gauss_plane, [6, 2], xs)
    b = SC.sc_lagrange_eval(gauss_plane, [0, 2], xs - np.array([6.0, 0.0]))
    assert np.max(np.abs(a - b)) < 1e-10


def test_lagrange_eval_matches_lattice_field(m4_halfline):
    ts = np.arange(-4, 5)
    field = SC.sc_lagrange_on_lattice(m4_halfline, [5], 4)
    direct = SC.sc_lagrange_eval(m4_halfline, [5], (5.0 + ts)[:, None])
    assert np.max(np.abs(field - direct)) < 1e-12


# ---------------------------------------------------------------------------
# interpolation operator


def test_interpolate_delta_data_gives_lagrange(m4_halfline):
    y = np.zeros(13)
    y[4] = 1.0
    win = DataWindow(np.array([0]), y)
    xs = np.linspace(0.0, 9.0, 19)[:, None]
    s = SC.sc_interpolate(m4_halfline, win, xs)
    chi = SC.sc_lagrange_eval(m4_halfline, [4], xs)
    assert np.max(np.abs(s - chi)) < 1e-10


def test_interpolate_routes_agree(gauss_plane):
    rng = np.random.default_rng(9)
    win = DataWindow(np.array([-3, 0]), rng.standard_normal((7, 5)))
    xs = rng.uniform(-1.0, 4.0, size=(11, 2))
    a = SC.sc_interpolate(gauss_plane, win, xs, route="coefficient")
    b = SC.sc_interpolate(gauss_plane, win, xs, route="lagrange")
    assert np.max(np.abs(a - b)) < 1e-9


def test_interpolate_matches_data_at_interior_sites(m4_halfline):
    rng = np.random.default_rng(2)
    y = rng.standard_normal(41)
    win = DataWindow(np.array([0]), y)
    js = np.arange(5, 36)
    vals = SC.sc_interpolate(m4_halfline, win, js[:, None].astype(float))
    assert np.max(np.abs(vals - y[js])) < 1e-7


def test_interpolate_alternating_data(m4_halfline):
    y = (-1.0) ** np.arange(41)
    win = DataWindow(np.array([0]), y)
    js = np.arange(5, 36)
    vals = SC.sc_interpolate(m4_halfline, win, js[:, None].astype(float))
    assert np.max(np.abs(vals - y[js])) < 1e-7


def test_interpolate_ignores_data_outside_halfspace(m4_halfline):
    y = np.ones(9)
    win = DataWindow(np.array([-4]), y)       # half the window sits below 0
    trimmed = DataWindow(np.array([0]), y[4:])
    xs = np.linspace(0.0, 3.0, 7)[:, None]
    a = SC.sc_interpolate(m4_halfline, win, xs)
    b = SC.sc_interpolate(m4_halfline, trimmed, xs)
    assert np.max(np.abs(a - b)) < 1e-12


def test_interpolate_reproduces_kernel_from_halfspace_samples():
    sys = build(K.gaussian(1), 6, 40, 512)
    y = sys.kernel.eval_many(np.arange(0, 31.0)[:, None])
    win = DataWindow(np.array([0]), y)
    js = np.arange(2, 25)
    vals = SC.sc_interpolate(sys, win, js[:, None].astype(float))
    expect = sys.kernel.eval_many(js[:, None].astype(float))
    assert np.max(np.abs(vals - expect)) < 1e-7


def test_interpolate_rejects_unknown_route(m4_halfline):
    win = DataWindow(np.array([0]), np.ones(3))
    with pytest.raises(ConfigError):
        SC.sc_interpolate(m4_halfline, win, np.zeros((1, 1)), route="spectral")


# ---------------------------------------------------------------------------
# Schur norm and dense-window identities


def test_schur_norm_hat_kernel():
    assert SC.schur_norm(SC.build_semicardinal(K.bspline(2))) == 1.0


def test_schur_norm_cubic(m4_halfline):
    val = SC.schur_norm(m4_halfline)
    assert val <= 3.0 + 1e-6
    assert val > 2.99


def test_schur_norm_boxspline():
    sys = build(K.boxspline222(), 2, 48, 512)
    bound = float(np.abs(sys.factor.gamma.coeffs).sum()) ** 2
    val = SC.schur_norm(sys)
    assert val <= bound + 1e-6
    assert delta_defect(sys, [0, 0]) < 1e-7


def test_cholesky_identity_hat_kernel():
    rep = SC.cholesky_residual(SC.build_semicardinal(K.bspline(2)), 12)
    assert rep.gram_residual < 1e-14
    assert rep.inverse_residual < 1e-14


def test_cholesky_identity_cubic(m4_halfline):
    rep = SC.cholesky_residual(m4_halfline, 40, buffer=10)
    assert rep.gram_residual < 1e-8
    assert rep.inverse_residual < 1e-8
    assert rep.strictly_triangular is None
    assert rep.size == 41 and rep.interior_size == 31


def test_cholesky_identity_ordered_line():
    sys = build(K.bspline(4), 2, 40, 512, HalfSpace.ordered(LinearOrder.lex(1)))
    rep = SC.cholesky_residual(sys, 40, buffer=10)
    assert rep.gram_residual < 1e-8
    assert rep.strictly_triangular is True


def test_cholesky_identity_plane(gauss_plane, gauss_plane_lex):
    rep = SC.cholesky_residual(gauss_plane, 6, buffer=2)
    assert rep.gram_residual < 1e-6
    assert rep.inverse_residual < 1e-6
    repo = SC.cholesky_residual(gauss_plane_lex, 6, buffer=2)
    assert repo.gram_residual < 1e-6
    assert repo.strictly_triangular is True


def test_cholesky_window_cap(m4_halfline):
    with pytest.raises(ConfigError):
        SC.cholesky_residual(m4_halfline, 5000)


# ---------------------------------------------------------------------------
# decay transfer


def test_cubic_entry_decay_rate(m4_halfline):
    for jd in (0, 5):
        col = SC.sc_column(m4_halfline, [jd])
        ks = np.arange(jd + 1, jd + 26)
        vals = np.abs(col.values[ks - col.lo[0]])
        keep = vals > 1e-13
        dist = (ks - jd)[keep]
        fit = np.polyfit(dist, np.log(vals[keep]), 1)
        assert abs(-fit[0] - np.log(2.0 + SQ3)) < 0.02 * np.log(2.0 + SQ3)
        logs = np.log(vals[keep])
        r2 = 1.0 - (logs - np.polyval(fit, dist)).var() / logs.var()
        assert r2 > 0.99


def test_axis_rate_not_slower_than_mixed(gauss_plane):
    col = SC.sc_column(gauss_plane, [0, 0])

    def ray_rate(direction, hi):
        ts = np.arange(1, hi + 1)
        pts = ts[:, None] * np.array(direction)
        idx = pts - col.lo
        vals = np.abs(col.values[idx[:, 0], idx[:, 1]])
        keep = vals > 1e-13
        l1 = ts * np.abs(direction).sum()
        return -np.polyfit(l1[keep], np.log(vals[keep]), 1)[0]

    axis = ray_rate([0, 1], 14)
    mixed = ray_rate([1, 1], 10)
    assert axis >= mixed - 0.05


def test_line_gim_entry_power_decay():
    sys = build(K.gim(1, 1.5), 900, 1536, 16384)
    pooled = {"A": 0.0, "B": 0.0, "all": 0.0}
    for j in SC.probe_indices(sys.halfspace):
        col = SC.sc_column(sys, j)
        ks = np.arange(0, 2001)
        vals = np.abs(col.values[ks - col.lo[0]])
        dist = np.abs(ks - j[0])
        stat = vals * (1.0 + dist) ** 3
        pooled["A"] = max(pooled["A"], stat[(dist >= 16) & (dist <= 31)].max())
        pooled["B"] = max(pooled["B"], stat[(dist >= 32) & (dist <= 50)].max())
        pooled["all"] = max(pooled["all"], stat[(dist >= 2) & (dist <= 50)].max())
    assert pooled["all"] < 10.0
    assert abs(pooled["A"] - pooled["B"]) <= 0.10 * pooled["A"]


def test_plane_gim_entry_power_decay():
    sys = build(K.gim(2, 2.0), 88, 256, 2048)
    sup = 0.0
    for j in SC.probe_indices(sys.halfspace):
        col = SC.sc_column(sys, j)
        pts = box_points(col.lo, col.lo + np.array(col.values.shape) - 1)
        dist = np.sqrt(((pts - j) ** 2).sum(axis=1)).reshape(col.values.shape)
        stat = np.abs(col.values) * (1.0 + dist) ** 4
        sup = max(sup, stat[(dist >= 2) & (dist <= 50)].max())
    assert sup < 10.0
