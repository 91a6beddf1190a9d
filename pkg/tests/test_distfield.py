import numpy as np
import pytest

from conftest import cached_field
from sharphardy.distfield import (boundary_layer_mask, build_field, fast_sweep, make_grid, read_raw,
                                  ridge_for_samples, slice2d, write_pgm, write_raw)
from sharphardy.domains import make_domain
from sharphardy.errors import ConfigurationError


def ball():
    return cached_field("ball", 128, ridge=True, R=1.0, dim=2)


def square():
    return cached_field("box", 128, ridge=True, sides=(1.0, 1.0))


def torus():
    return cached_field("torus", 48, ridge=True, r=1.0, R=2.0)


def test_eikonal_solver_on_disk():
    f = cached_field("ball", 256, R=1.0, dim=2)
    X = f.grid.nodes()[f.inside]
    err = np.abs(f.delta_eikonal[f.inside] - (1 - np.linalg.norm(X, axis=1)))
    assert err.max() <= 2 * f.grid.spacing


def test_eikonal_solver_on_ball_3d():
    f = cached_field("ball", 64, R=1.0, dim=3)
    X = f.grid.nodes()[f.inside]
    err = np.abs(f.delta_eikonal[f.inside] - (1 - np.linalg.norm(X, axis=1)))
    assert err.max() <= 2 * f.grid.spacing


def test_eikonal_solver_square_centre():
    f = square()
    i = tuple(np.argmin(np.abs(ax - 0.5)) for ax in f.grid.axes())
    assert f.delta_eikonal[i] == pytest.approx(0.5, abs=2 * f.grid.spacing)


def test_eikonal_solver_on_torus():
    f = torus()
    X = f.grid.nodes()[f.inside]
    oracle = 1 - np.hypot(np.hypot(X[:, 0], X[:, 1]) - 2, X[:, 2])
    assert np.max(np.abs(f.delta_eikonal[f.inside] - oracle)) <= 3 * f.grid.spacing


def test_fast_sweep_is_a_plain_distance_transform():
    seed = np.full((41, 41), np.inf)
    seed[20, 20] = 0.0
    free = np.isinf(seed)
    u = fast_sweep(seed, free, 0.1)
    assert u[20, 30] == pytest.approx(1.0)
    assert u[30, 30] == pytest.approx(np.sqrt(2.0), rel=0.1)


def test_implicit_circle_distance():
    D = make_domain("implicit", expr="x**2 + y**2 - 1", lo="-1.1 -1.1", hi="1.1 1.1")
    f = build_field(D, cells=128, ridge=False)
    X = f.grid.nodes()[f.inside]
    assert np.max(np.abs(f.delta[f.inside] - (1 - np.linalg.norm(X, axis=1)))) <= 3 * f.grid.spacing


def test_singular_set_of_disk_is_the_centre():
    f = ball()
    X = f.grid.nodes()[f.singular_mask]
    assert len(X) > 0
    assert np.linalg.norm(X, axis=1).max() <= 2 * f.grid.spacing


def test_singular_set_of_square_is_the_diagonals():
    f = square()
    P = f.grid.nodes()[f.singular_mask]
    d = np.minimum(np.abs(P[:, 0] - P[:, 1]), np.abs(P[:, 0] + P[:, 1] - 1)) / np.sqrt(2)
    assert d.max() <= 2 * f.grid.spacing


def test_singular_set_of_torus_is_the_core_circle():
    f = torus()
    P = f.grid.nodes()[f.singular_mask]
    assert np.hypot(np.hypot(P[:, 0], P[:, 1]) - 2, P[:, 2]).max() <= 2 * f.grid.spacing


def test_singular_fraction_shrinks():
    D = make_domain("box", sides=(1.0, 1.0))
    fr = [build_field(D, cells=c, ridge=False) for c in (32, 64, 128)]
    frac = [f.singular_mask.sum() / f.inside.sum() for f in fr]
    assert frac[0] > frac[1] > frac[2]


def test_ridge_on_disk():
    f = ball()
    ins = f.inside & ~f.singular_mask
    np.testing.assert_allclose(f.ridge_Lambda[ins], 1.0, atol=2 * f.grid.spacing)
    np.testing.assert_allclose(f.h_field[ins], f.delta[ins] / f.ridge_Lambda[ins])


def test_ridge_at_side_midpoint_of_square():
    f = square()
    D = f.domain
    S = D.sample(64)
    rho, cens = ridge_for_samples(D, f, S)
    i = np.argmin(np.linalg.norm(S.points - [0.5, 0.0], axis=1))
    assert rho[i] == pytest.approx(0.5, abs=f.grid.spacing)
    assert not cens.any()


def test_ridge_on_torus():
    f = torus()
    S = f.domain.sample(16)
    rho, _ = ridge_for_samples(f.domain, f, S)
    np.testing.assert_allclose(rho, 1.0, atol=f.grid.spacing)


@pytest.mark.parametrize("make", [ball, square, torus])
def test_h_field_bounds(make):
    f = make()
    h = f.h_field
    assert np.all((h >= 0) & (h <= 1))
    assert np.all(h[f.singular_mask] == 1.0)
    near = f.inside & (f.delta <= 0.5 * f.grid.spacing)
    assert np.all(h[near] <= f.grid.spacing / np.nanmin(f.ridge_Lambda[f.inside]))


@pytest.mark.parametrize("make", [ball, square, torus])
def test_gradient_is_unit_and_matches_nearest_point(make):
    f = make()
    g = f.grid
    m = boundary_layer_mask(f)
    grads = np.stack(np.gradient(np.where(f.inside, f.delta_eikonal, 0.0), g.spacing), axis=-1)
    norms = np.linalg.norm(grads[m], axis=1)
    assert np.all(np.abs(norms - 1) <= 5 * g.spacing)
    X = g.nodes()[m]
    np.testing.assert_allclose(np.linalg.norm(X - f.nearest[m], axis=1), f.delta[m], atol=3 * g.spacing)


@pytest.mark.parametrize("make", [ball, square, torus])
def test_curvature_factors_positive_off_singular_set(make):
    f = make()
    m = boundary_layer_mask(f)
    fac = 1 - f.delta[m][:, None] * f.kappas[m]
    assert np.all(fac > 0)


def test_thin_feature_check():
    with pytest.raises(ConfigurationError):
        make_grid(make_domain("annulus", r_in=0.05, r_out=1.0), cells=128)


def test_exports_round_trip(tmp_path):
    f = ball()
    write_raw(tmp_path / "d.raw", f.delta, f.grid)
    a, meta = read_raw(tmp_path / "d.raw")
    np.testing.assert_array_equal(a, f.delta)
    assert float(meta["spacing"]) == f.grid.spacing
    vmin, vmax = write_pgm(tmp_path / "d.pgm", slice2d(f.delta), f.inside)
    head = (tmp_path / "d.pgm").read_text().split("\n")[:3]
    assert head[0] == "P2" and head[2] == "65535"
    assert 0.0 <= vmin <= f.grid.spacing and vmax == pytest.approx(1.0, abs=f.grid.spacing)


def test_slice_of_3d_array():
    a = np.arange(24).reshape(2, 3, 4)
    np.testing.assert_array_equal(slice2d(a, axis=2, index=1), a[:, :, 1])
    assert slice2d(a, axis=0).shape == (3, 4)
