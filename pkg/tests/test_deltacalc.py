import numpy as np
import pytest

from conftest import cached_field
from sharphardy import deltacalc as dc
from sharphardy.distfield import build_field, ridge_for_samples
from sharphardy.domains import Torus, convexity_report, make_domain
from sharphardy.errors import PreconditionError
from sharphardy.symfun import curvature_sum_fields


def lap_of(f):
    return dc.neg_laplacian_formula(f)


def test_formula_on_ball_3d_is_n_over_radius():
    f = cached_field("ball", 64, R=1.0, dim=3)
    lap = lap_of(f)
    X = f.grid.nodes()
    r = np.linalg.norm(X, axis=-1)
    m = lap.good_mask
    np.testing.assert_allclose(lap.neg_lap_formula[m], 2.0 / r[m], rtol=1e-12)
    i = np.unravel_index(np.argmin(np.where(m, np.abs(r - 0.5), np.inf)), r.shape)
    assert lap.neg_lap_formula[i] == pytest.approx(2.0 / r[i]) and abs(r[i] - 0.5) < f.grid.spacing


def test_fd_on_disk_at_half_radius():
    f = cached_field("ball", 256, R=1.0, dim=2)
    lap = lap_of(f)
    r = np.linalg.norm(f.grid.nodes(), axis=-1)
    m = lap.good_mask & np.isfinite(lap.neg_lap_fd) & (np.abs(r - 0.5) < f.grid.spacing)
    assert m.sum() > 100
    np.testing.assert_allclose(lap.neg_lap_fd[m], 1.0 / r[m], rtol=0.05)


def slab():
    return build_field(make_domain("box", sides=(1.0, 1.0), open_faces="x- x+ y+"), cells=64, ridge=False)


def test_flat_boundary_gives_zero_laplacian():
    f = slab()
    lap = lap_of(f)
    assert np.all(lap.neg_lap_formula[lap.good_mask] == 0.0)
    m = lap.good_mask & np.isfinite(lap.neg_lap_fd)
    assert m.sum() > 100 and np.max(np.abs(lap.neg_lap_fd[m])) <= 10 * f.grid.spacing


def test_box_far_from_diagonals_fd_is_zero():
    f = cached_field("box", 256, sides=(1.0, 1.0))
    lap = lap_of(f)
    m = lap.good_mask & np.isfinite(lap.neg_lap_fd)
    assert m.sum() > 100 and np.max(np.abs(lap.neg_lap_fd[m])) <= 10 * f.grid.spacing


def test_torus_inner_equator_limit():
    K = Torus(1.0, 2.0).kappas_theta(np.full(5, np.pi))
    lhs, _, _ = curvature_sum_fields(K, np.array([1e-1, 1e-2, 1e-3, 1e-4, 0.0]))
    assert np.all(np.diff(np.abs(lhs)) < 0) and lhs[-1] == 0.0


def test_distributional_residual_vanishes_on_slab():
    f = slab()
    lap = lap_of(f)
    phis = dc.random_bumps(f.domain, f, 5, seed=2)
    for r in dc.distributional_check(f, lap, phis):
        assert abs(r.residual) <= max(r.eps_quad, 1e-10)


def test_distributional_rejects_support_on_truncation_face():
    f = slab()
    lap = lap_of(f)
    phi = dc.TestFunction((0.5, 0.95), 0.2)
    with pytest.raises(PreconditionError):
        dc.distributional_check(f, lap, [phi])


def radial_residual(R, c_r, amp):
    """Residual for the bump centred at the origin of the unit disk, by 1D radial quadrature."""
    from scipy.integrate import quad
    phi = dc.TestFunction((0.0, 0.0), c_r, amp)

    def grad_term(r):
        # grad delta = -x/|x|, so grad delta . grad phi = -phi'(r)
        g = phi.gradient(np.array([[r, 0.0]]))[0, 0]
        return -g * 2 * np.pi * r

    def bound_term(r):
        return (1.0 / r) * phi.values(np.array([[r, 0.0]]))[0] * 2 * np.pi * r

    a = quad(grad_term, 0, c_r, limit=200)[0]
    b = quad(bound_term, 0, c_r, limit=200)[0]
    return a - b


def test_distributional_matches_radial_oracle():
    phi = dc.TestFunction((0.0, 0.0), 0.5, 1.0)
    exact = radial_residual(1.0, 0.5, 1.0)
    # equality holds for radial bumps centred on the singular point
    assert abs(exact) < 1e-8
    errs = []
    for cells in (256, 512):
        f = cached_field("ball", cells, R=1.0, dim=2)
        r = dc.distributional_check(f, lap_of(f), [phi])[0]
        assert abs(r.residual - exact) <= r.eps_quad
        errs.append(abs(r.residual - exact))
    # the 1/r weight makes the midpoint rule first order
    assert errs[1] <= 0.6 * errs[0]


def test_distributional_disk_bumps_nonnegative():
    f = cached_field("ball", 256, R=1.0, dim=2)
    lap = lap_of(f)
    for r in dc.distributional_check(f, lap, dc.random_bumps(f.domain, f, 10, seed=3)):
        assert r.residual >= -1e-3 * r.max_phi
        assert r.eps_quad > 0 and r.support_measure > 0


def test_distributional_torus_two_resolutions():
    phis = None
    res = []
    for cells in (48, 96):
        f = cached_field("torus", cells, r=1.0, R=2.0)
        if phis is None:
            phis = dc.random_bumps(f.domain, f, 5, seed=4, min_cells=4)
        res.append([r.residual for r in dc.distributional_check(f, lap_of(f), phis)])
    a, b = np.array(res)
    assert np.all(b >= 0) and np.all(np.abs(a - b) <= 0.05 * np.abs(b) + 1e-3)


@pytest.mark.parametrize("kind,cells,kw,expected", [
    ("ball", 64, dict(R=1.0, dim=3), 2.0),
    ("torus", 48, dict(r=1.0, R=2.0), 0.0),
    ("annulus", 128, dict(r_in=0.5, r_out=1.0), -2.0),
])
def test_inf_equivalence(kind, cells, kw, expected):
    f = cached_field(kind, cells, **kw)
    rep = convexity_report(f.domain)
    ie = dc.inf_equivalence(f, lap_of(f), rep)
    assert ie.agree
    assert ie.inf_H == pytest.approx(expected, abs=1e-3)
    assert ie.inf_neg_lap == pytest.approx(expected, abs=ie.tolerance)


@pytest.mark.parametrize("kind,cells,kw", [
    ("ball", 128, dict(R=1.0, dim=2)), ("box", 128, dict(sides=(1.0, 1.0))),
    ("torus", 48, dict(r=1.0, R=2.0)), ("torus", 48, dict(r=1.0, R=3.0)),
    ("annulus", 128, dict(r_in=0.5, r_out=1.0)),
])
def test_verdict_matches_convexity_and_formula_dominates_bound(kind, cells, kw):
    f = cached_field(kind, cells, **kw)
    lap = lap_of(f)
    rep = convexity_report(f.domain)
    assert dc.inf_equivalence(f, lap, rep).verdict_mean_convex == rep.weakly_mean_convex
    m = lap.good_mask
    assert np.all(lap.neg_lap_formula[m] >= lap.bound_field[m] - 1e-12 * (1 + np.abs(lap.bound_field[m])))
    assert lap.inconsistent_count == 0


@pytest.mark.parametrize("kind,kw", [("ball", dict(R=1.0, dim=2)), ("torus", dict(r=1.0, R=2.0)),
                                     ("box", dict(sides=(1.0, 1.0))), ("annulus", dict(r_in=0.5))])
def test_formula_monotone_along_rays(kind, kw):
    D = make_domain(kind, **kw)
    f = build_field(D, cells=32 if D.dim == 3 else 64, ridge=False)
    S = D.sample(32)
    rho, _ = ridge_for_samples(D, f, S)
    assert dc.ray_monotonicity(D, S, rho) == 0


def test_growth_coefficient_ball():
    # p = 2, H0 = n/R with n = 2: coefficient 4 (n/R)^2 / n
    assert dc.growth_coefficient(2, 2.0, 2) == pytest.approx(4 * 4 / 2)


def test_growth_estimate_ball():
    f = cached_field("ball", 64, R=1.0, dim=3)
    lap = lap_of(f)
    assert dc.growth_estimate_check(f, lap, 2, 2.0) == 0
    assert dc.growth_estimate_check(f, lap, 2, 0.0) == 0


def test_growth_estimate_thick_torus_p3():
    for cells in (32, 48):
        f = cached_field("torus", cells, r=1.0, R=3.0)
        rep = convexity_report(f.domain)
        assert dc.growth_estimate_check(f, lap_of(f), 3, rep.H0) == 0


def test_growth_estimate_detects_overshoot():
    f = cached_field("ball", 64, R=1.0, dim=3)
    assert dc.growth_estimate_check(f, lap_of(f), 2, 4.0) > 0


def test_growth_estimate_preconditions():
    f = cached_field("ball", 64, R=1.0, dim=3)
    with pytest.raises(PreconditionError):
        dc.growth_estimate_check(f, lap_of(f), 2, -1.0)
    with pytest.raises(PreconditionError):
        dc.growth_estimate_check(f, lap_of(f), 1.0, 1.0)


def test_test_function_gradient_matches_difference_quotient():
    phi = dc.TestFunction((0.1, -0.2), 0.4, 1.5)
    X = np.array([[0.2, -0.1], [0.0, -0.3]])
    e = 1e-6
    for k in range(2):
        dX = np.zeros(2)
        dX[k] = e
        num = (phi.values(X + dX) - phi.values(X - dX)) / (2 * e)
        np.testing.assert_allclose(phi.gradient(X)[:, k], num, rtol=1e-6)
    assert phi.values(np.array([[0.1, -0.2]]))[0] == pytest.approx(1.5)


def test_random_bumps_stay_inside():
    f = cached_field("annulus", 128, r_in=0.5, r_out=1.0)
    for phi in dc.random_bumps(f.domain, f, 20, seed=1):
        assert f.domain.distance(np.array([phi.center]))[0] > phi.radius
        assert np.all(f.domain.inside(np.array([phi.center])))
