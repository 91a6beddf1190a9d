import numpy as np
import pytest

from sharphardy.domains import (Ball, Box, CatenoidSlab, EllipsoidShell, Implicit, ParaboloidCap, Torus,
                                boundary_sample, convexity_report, ellipsoid_project, make_domain)
from sharphardy.errors import ConfigurationError, DomainError

CATALOG = [
    ("ball", dict(R=1.0, dim=2)),
    ("ball", dict(R=1.5, dim=3)),
    ("torus", dict(r=1.0, R=2.0)),
    ("annulus", dict(r_in=0.5, r_out=1.0)),
    ("box", dict(sides=(1.0, 2.0))),
    ("paraboloid_cap", dict(height=1.0)),
    ("catenoid_slab", dict(c=1.0, thickness=2.0)),
    ("ellipsoid_shell", dict()),
]


def test_sphere_samples_have_unit_curvatures():
    S = boundary_sample(Ball(1.0, dim=3), 256)
    assert all(s.kappas.entries == (1.0, 1.0) and s.H == 2.0 for s in S)


@pytest.mark.parametrize("R,dim", [(1.0, 2), (2.0, 3), (0.5, 4)])
def test_ball_mean_curvature_is_n_over_R(R, dim):
    S = Ball(R, dim).sample(128)
    np.testing.assert_allclose(S.H, (dim - 1) / R, rtol=1e-12)


def test_torus_curvatures():
    T = Torus(1.0, 2.0)
    S = T.sample(64)
    theta = np.arctan2(S.points[:, 2], np.hypot(S.points[:, 0], S.points[:, 1]) - 2.0)
    np.testing.assert_allclose(S.kappas[:, 0], 1.0)
    np.testing.assert_allclose(S.kappas[:, 1], np.cos(theta) / (2 + np.cos(theta)), atol=1e-12)


def test_annulus_inner_circle_curvature():
    S = make_domain("annulus", r_in=0.5, r_out=1.0).sample(64)
    inner = S.component == 0
    np.testing.assert_allclose(S.kappas[inner], -2.0)
    np.testing.assert_allclose(S.kappas[~inner], 1.0)
    # outward normal of the domain on the inner circle points into the hole
    assert np.all(np.sum(S.normals[inner] * S.points[inner], axis=1) < 0)


def test_convexity_thick_torus():
    rep = convexity_report(Torus(1.0, 3.0))
    assert rep.weakly_mean_convex and rep.H0 == pytest.approx(0.5, abs=1e-3)


def test_convexity_critical_torus():
    rep = convexity_report(Torus(1.0, 2.0))
    assert rep.weakly_mean_convex
    assert rep.H0 == pytest.approx(0.0, abs=1e-3) and rep.H0 <= 0.0


def test_critical_torus_minimum_converges_to_zero():
    vals = [abs(convexity_report(Torus(1.0, 2.0), res).H0) for res in (32, 128, 512)]
    assert vals[0] > vals[1] > vals[2]


def test_convexity_thin_annulus():
    rep = convexity_report(make_domain("annulus", r_in=0.05, r_out=1.0))
    assert not rep.weakly_mean_convex
    assert rep.H0 == pytest.approx(-20.0, rel=1e-12)


def test_convexity_rejects_tiny_resolution():
    with pytest.raises(DomainError):
        convexity_report(Ball(), 4)


@pytest.mark.parametrize("kind,kw", [c for c in CATALOG if c[0] != "paraboloid_cap"])
def test_scaling_divides_curvatures(kind, kw):
    D = make_domain(kind, **kw)
    t = 2.5
    S1, S2 = D.sample(32), D.scaled(t).sample(32)
    np.testing.assert_allclose(S2.points, t * S1.points, rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(S2.kappas, S1.kappas / t, rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("kind,kw", CATALOG)
def test_projection_lands_on_sampled_boundary(kind, kw):
    D = make_domain(kind, **kw)
    S = D.sample(32)
    inward = S.points - 1e-3 * S.normals
    Z, comp = D.project(inward)
    ok = D.truncation_gap(inward) > 1e-2
    np.testing.assert_allclose(Z[ok], S.points[ok], atol=1e-6)
    np.testing.assert_allclose(D.distance(inward)[ok], 1e-3, rtol=1e-4)
    assert np.all(D.inside(inward[ok]))


@pytest.mark.parametrize("kind,kw", CATALOG)
def test_geometry_matches_projection(kind, kw):
    D = make_domain(kind, **kw)
    rng = np.random.default_rng(1)
    lo, hi = D.bounding_box
    X = rng.uniform(lo, hi, (4000, D.dim))
    X = X[D.inside(X)][:200]
    delta, Z, comp, nrm, K = D.geometry(X)
    np.testing.assert_allclose(delta, D.distance(X), atol=1e-9)
    np.testing.assert_allclose(np.linalg.norm(nrm, axis=1), 1.0, atol=1e-9)
    # the nearest point is reached along the inward normal
    np.testing.assert_allclose(X, Z - delta[:, None] * nrm, atol=1e-7)


def test_paraboloid_cap_refuses_scaling():
    with pytest.raises(DomainError):
        ParaboloidCap().scaled(2.0)


def test_implicit_sphere_curvature_matches_ball():
    D = Implicit("x**2 + y**2 + z**2 - 1", (-1.2,) * 3, (1.2,) * 3)
    S = D.sample(64)
    np.testing.assert_allclose(S.kappas, 1.0, atol=1e-4)


def test_implicit_circle_curvature_scaling():
    D = make_domain("implicit", expr="x**2 + y**2 - 1", lo="-1.2 -1.2", hi="1.2 1.2")
    S = D.scaled(2.0).sample(64)
    np.testing.assert_allclose(S.kappas, 0.5, atol=1e-4)


def test_box_faces_are_flat_and_open_faces_truncate():
    B = Box((1.0, 1.0), open_faces="y+")
    assert B.truncated
    S = B.sample(64)
    np.testing.assert_allclose(S.kappas, 0.0)
    assert not np.any(np.isclose(S.points[:, 1], 1.0) & (S.points[:, 0] > 0.01) & (S.points[:, 0] < 0.99))
    assert B.truncation_gap(np.array([[0.5, 0.9]]))[0] == pytest.approx(0.1)


def test_paraboloid_and_catenoid_are_truncated():
    assert ParaboloidCap().truncated and CatenoidSlab().truncated


def test_catenoid_is_minimal():
    C = CatenoidSlab(1.0, 2.0)
    S = C.sample(64)
    np.testing.assert_allclose(S.H, 0.0, atol=1e-12)
    k0 = 1 / np.cosh(1.0) ** 2
    assert C.kappa_s(np.array([1.0]))[0] == pytest.approx(k0, rel=1e-12)
    assert k0 <= np.abs(S.kappas).min() <= 1.05 * k0


def test_ellipsoid_projection_is_orthogonal():
    axes = np.array([2.0, 1.5, 1.0])
    rng = np.random.default_rng(2)
    Y = rng.normal(size=(100, 3))
    Z = ellipsoid_project(Y, axes)
    np.testing.assert_allclose(np.sum((Z / axes) ** 2, axis=1), 1.0, atol=1e-10)
    g = Z / axes ** 2
    r = Y - Z
    cross = np.cross(r, g)
    assert np.max(np.linalg.norm(cross, axis=1) / (np.linalg.norm(g, axis=1) + 1e-300)) < 1e-8


def test_ellipsoid_shell_has_negative_inner_mean_curvature():
    rep = convexity_report(EllipsoidShell())
    assert not rep.weakly_mean_convex


@pytest.mark.parametrize("kind,kw", [("ball", dict(R=-1)), ("torus", dict(r=2, R=1)),
                                     ("annulus", dict(r_in=1, r_out=0.5)), ("box", dict(sides="1 -1"))])
def test_invalid_parameters(kind, kw):
    with pytest.raises(DomainError):
        make_domain(kind, **kw)


def test_unknown_kind_and_bad_numbers():
    with pytest.raises(ConfigurationError):
        make_domain("sphere")
    with pytest.raises(ConfigurationError):
        make_domain("ball", R="abc")
    with pytest.raises(ConfigurationError):
        make_domain("ball", dim="2.5")


def test_axisymmetric_flag():
    assert Torus().axisymmetric and not Ball(dim=2).axisymmetric and Ball(dim=3).axisymmetric
