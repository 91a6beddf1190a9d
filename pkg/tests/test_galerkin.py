import numpy as np
import pytest
import scipy.sparse.linalg as spla

from sharphardy import galerkin as gk
from sharphardy.domains import make_domain
from sharphardy.errors import PreconditionError


def test_cutoff_values_and_derivative():
    s = np.array([0.0, 0.25, 0.5, 0.75, 1.0, 2.0])
    np.testing.assert_allclose(gk.eta(s), [1, 1, 1, 0.5, 0, 0], atol=1e-15)
    x = np.linspace(0.01, 1.2, 200)
    e = 1e-7
    np.testing.assert_allclose(gk.eta_prime(x), (gk.eta(x + e) - gk.eta(x - e)) / (2 * e), atol=1e-6)


@pytest.mark.parametrize("e", [gk.Enrichment(0.75), gk.Enrichment(0.55, 0, 0.4)])
def test_enrichment_slope_is_derivative(e):
    t = np.linspace(0.05, 0.5, 40)
    h = 1e-7
    np.testing.assert_allclose(e.slope(t), (e.profile(t + h) - e.profile(t - h)) / (2 * h), rtol=1e-5, atol=1e-8)


@pytest.mark.parametrize("beta", [0.0, -0.5, 1.0, -0.99])
def test_layer_integral_on_disk(beta):
    layer = gk.make_layer(make_domain("ball", R=1.0, dim=2))
    exact = 2 * np.pi * (1 / (beta + 1) - 1 / (beta + 2))
    assert gk.layer_integral(layer, beta) == pytest.approx(exact, rel=1e-3)


def test_layer_integral_on_ball_3d():
    layer = gk.make_layer(make_domain("ball", R=1.0, dim=3))
    assert gk.layer_integral(layer, 0.0) == pytest.approx(4 * np.pi / 3, rel=1e-2)


def test_layer_volume_of_torus():
    layer = gk.make_layer(make_domain("torus", r=1.0, R=2.0))
    assert gk.layer_integral(layer, 0.0) == pytest.approx(4 * np.pi ** 2, rel=1e-3)


def test_layer_split_rule_matches_closed_form():
    # with smooth = coef t^beta the Gauss part must reproduce the closed form on [tau/2, tau]
    layer = gk.make_layer(make_domain("ball", R=1.0, dim=2))
    beta, tau = 0.3, 0.6
    split = gk.layer_integral(layer, beta, 2.0, lambda t: 2.0 * t ** beta, tau)
    closed = gk.layer_integral(layer, beta, 2.0, upper=tau)
    assert split == pytest.approx(closed, rel=1e-12)


def small_system(kind="box", h=1 / 16, **kw):
    return gk.assemble(make_domain(kind, **kw), h)


def test_forms_are_symmetric_and_definite():
    S = small_system()
    for X in (S.A, S.B, S.C, S.M):
        assert abs(X - X.T).max() <= 1e-12 * abs(X).max()
    # enrichment blocks are integrated exactly, cross blocks by cell Gauss rules; the
    # mismatch on cells cut by the ridge of delta is about 1e-7 of the norm of M
    for X, rel in ((S.A, 0.0), (S.B, 0.0), (S.M, 1e-6)):
        ev = np.linalg.eigvalsh(X.toarray())
        assert ev[0] > -rel * ev[-1]


def test_eigen_solver_matches_scipy():
    S = small_system()
    r = gk.smallest_eigenpair(S.A, S.B, S.start_vector())
    ref = spla.eigsh(S.A, k=1, M=S.B, sigma=0, which="LM", return_eigenvectors=False)[0]
    assert r.converged and r.value == pytest.approx(ref, rel=1e-8)
    assert np.all(np.diff(r.history) <= 1e-12 * abs(r.history[0]))
    assert r.vector @ (S.B @ r.vector) == pytest.approx(1.0)


def test_eigen_solver_is_deterministic():
    S = small_system()
    a = gk.smallest_eigenpair(S.A, S.B, S.start_vector(), seed=3)
    b = gk.smallest_eigenpair(S.A, S.B, S.start_vector(), seed=3)
    assert a.history == b.history


def test_dirichlet_eigenvalue_of_square():
    vals = []
    for h in (1 / 16, 1 / 32):
        S = gk.assemble(make_domain("box", sides=(1.0, 1.0)), h, alphas=())
        vals.append(gk.smallest_eigenpair(S.A, S.M, S.start_vector()).value)
    assert 2 * np.pi ** 2 < vals[1] < vals[0] < 1.5 * 2 * np.pi ** 2


def test_axisymmetric_ball_eigenvalue():
    S = gk.assemble(make_domain("ball", R=1.0, dim=3), 1 / 32, alphas=())
    assert S.mesh.mode == "axisym"
    lam = gk.smallest_eigenpair(S.A, S.M, S.start_vector()).value
    assert np.pi ** 2 < lam < 1.25 * np.pi ** 2


def test_discrete_hardy_quotient_respects_sharp_constant():
    for kind, kw in (("box", dict(sides=(1.0, 1.0))), ("ball", dict(R=1.0, dim=2))):
        S = gk.assemble(make_domain(kind, **kw), 1 / 16)
        assert gk.smallest_eigenpair(S.A, S.B, S.start_vector()).value >= 0.25


def test_evaluate_reproduces_nodal_values():
    S = small_system()
    rng = np.random.default_rng(0)
    c = rng.normal(size=S.ndof)
    c[S.n_free:] = 0
    X = S.mesh.node_coords()[S.mesh.node_dof >= 0]
    np.testing.assert_allclose(S.evaluate(c, X), c[S.mesh.node_dof[S.mesh.node_dof >= 0]], atol=1e-12)


def test_enrichment_only_function_has_exact_forms():
    # u = delta^alpha on the disk: int |grad u|^2 = alpha^2 int t^(2 alpha - 2) (1 - t) dt * 2 pi
    D = make_domain("ball", R=1.0, dim=2)
    S = gk.assemble(D, 1 / 8, alphas=(0.75,))
    c = np.zeros(S.ndof)
    c[-1] = 1.0
    a = 0.75
    exact_A = 2 * np.pi * a * a * (1 / (2 * a - 1) - 1 / (2 * a))
    exact_B = 2 * np.pi * (1 / (2 * a - 1) - 1 / (2 * a))
    assert c @ (S.A @ c) == pytest.approx(exact_A, rel=2e-3)
    assert c @ (S.B @ c) == pytest.approx(exact_B, rel=2e-3)


def test_multi_component_enrichment_uses_cutoffs():
    S = gk.assemble(make_domain("annulus", r_in=0.5, r_out=1.0), 1 / 16)
    comps = {e.component for e in S.enrichments}
    assert comps == {0, 1}
    assert all(np.isfinite(e.tau) and e.tau == pytest.approx(0.25, abs=0.01) for e in S.enrichments)


def test_truncated_domain_disables_enrichment():
    S = gk.assemble(make_domain("box", sides=(1.0, 1.0), open_faces="y+"), 1 / 16)
    assert S.enrichments == [] and S.flags


def test_axisym_requires_rotation_invariance():
    with pytest.raises(PreconditionError):
        gk.choose_mode(make_domain("box", sides=(1.0, 1.0, 1.0)), "axisym")


def test_mesh_clearance():
    D = make_domain("ball", R=1.0, dim=2)
    m = gk.make_mesh(D, 1 / 16, clearance=1.0)
    X = m.node_coords()[m.node_dof >= 0]
    assert np.all(D.distance(X) >= 1 / 16 - 1e-12)
