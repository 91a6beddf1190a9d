"""Hardy quotients, best-constant estimates and the inequalities around them.

Quotients of grid functions use forward differences on the distance-field
grid. Best constants for p = 2 come from the enriched Galerkin space in
:mod:`sharphardy.galerkin`; for other p a descent on the multilinear space
gives an upper bound. Trial functions of the form g(delta) are integrated
exactly in normal coordinates around the boundary.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from . import galerkin as gk
from .deltacalc import random_bumps
from .distfield import ridge_distance
from .domains import convexity_report, sphere_area
from .errors import DomainError, PreconditionError
from .symfun import curvature_sum_fields

J0 = 0.940  # first positive root quoted to three decimals


def hardy_constant(p):
    return ((p - 1) / p) ** p


# -- reports --------------------------------------------------------------

@dataclass
class QuotientReport:
    value: Optional[float]
    p: float
    kind: str
    iterations: int
    history: list
    grid_resolution: float
    seed: int
    converged: bool = True
    upper_bound: bool = False
    flags: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


@dataclass
class RemainderTable:
    lambda_BM: float
    lambda_HHL: float
    lambda_FMT: float
    lambda_EL: float
    lambda_AW: float
    lambda_curvature: float
    diameter: float
    volume: float
    R_int: float
    sphere_area: float
    c_n: float
    j0: float = J0
    sources: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def constants(self):
        return {k: getattr(self, k) for k in
                ("lambda_BM", "lambda_HHL", "lambda_FMT", "lambda_EL", "lambda_AW", "lambda_curvature")}

    def to_dict(self):
        return asdict(self)


@dataclass
class SolverOptions:
    max_iter: int = 500
    tol: float = 1e-8
    seed: int = 0
    spacing: Optional[float] = None
    alphas: tuple = gk.DEFAULT_ALPHAS
    mode: Optional[str] = None
    block: int = 4
    layer_resolution: Optional[int] = None


@dataclass
class TrialFunction:
    """A test function f. ``values`` are nodal values on a distance-field grid when present.

    Boundary-layer trials are f = delta^exponent * eta(delta/cutoff) and are
    also known in closed form; eigen iterates keep their Galerkin system.
    """

    values: Optional[np.ndarray]
    description: str
    params: dict = field(default_factory=dict)
    system: object = field(default=None, repr=False)
    coef: Optional[np.ndarray] = field(default=None, repr=False)

    __test__ = False


# -- trial functions ------------------------------------------------------

def boundary_layer_trial(exponent, cutoff=None, field=None):
    """f = delta^exponent, multiplied by the C^1 cutoff eta(delta/cutoff) when a cutoff is given."""
    if exponent <= 0:
        raise DomainError("boundary-layer exponent must be positive")
    vals = None
    if field is not None:
        d = np.where(field.inside, field.delta, 0.0)
        vals = d ** exponent
        if cutoff is not None:
            vals = vals * gk.eta(d / cutoff)
        vals = np.where(field.inside, vals, 0.0)
    return TrialFunction(vals, "boundary_layer",
                         {"exponent": float(exponent), "cutoff": None if cutoff is None else float(cutoff)})


def bump_trials(field, count, seed, min_cells=8):
    """Random smooth bumps supported inside the domain, as grid trial functions."""
    X = field.grid.nodes()
    out = []
    for k, phi in enumerate(random_bumps(field.domain, field, count, seed, min_cells)):
        v = phi.values(X.reshape(-1, field.grid.ndim)).reshape(field.grid.dims)
        out.append(TrialFunction(np.where(field.inside, v, 0.0), "random_bump",
                                 {"seed": int(seed), "index": k, "center": list(phi.center),
                                  "radius": phi.radius, "amplitude": phi.amplitude}))
    return out


def eigen_trial(system, coef, field=None):
    """Galerkin eigen iterate; nodal values are filled in on ``field``'s grid when given."""
    vals = None
    if field is not None:
        X = field.grid.nodes().reshape(-1, field.grid.ndim)
        if system.mesh.mode == "axisym":
            X = np.stack([np.hypot(X[:, 0], X[:, 1]), X[:, 2]], axis=1)
        vals = system.evaluate(coef, X).reshape(field.grid.dims)
        vals = np.where(field.inside, vals, 0.0)
    return TrialFunction(vals, "eigen_iterate", {"ndof": int(system.ndof)}, system, coef)


# -- grid quadrature ------------------------------------------------------

def forward_gradient(values, spacing):
    """Forward differences along each axis, zero on the last layer."""
    out = []
    for ax in range(values.ndim):
        g = np.zeros_like(values)
        sl = [slice(None)] * values.ndim
        sl[ax] = slice(0, -1)
        g[tuple(sl)] = np.diff(values, axis=ax) / spacing
        out.append(g)
    return np.stack(out, axis=-1)


def _grid_terms(f, field, p):
    if f.values is None:
        raise DomainError("trial function has no grid values")
    vol = field.grid.cell_volume
    v = np.where(field.inside, f.values, 0.0)
    G = forward_gradient(v, field.grid.spacing)
    num = float(np.sum(np.sum(G ** 2, axis=-1) ** (p / 2)) * vol)
    m = field.inside & (field.delta > 0)
    den = float(np.sum(np.abs(v[m] / field.delta[m]) ** p) * vol)
    return num, den, v, G


def rayleigh_quotient(f, field, p=2.0, layer=None):
    """sum |grad_h f|^p / sum |f/delta|^p over the grid.

    Boundary-layer trials are evaluated in normal coordinates instead: their
    weight t^(p(a-1)) is too singular at the boundary for cell sums.
    """
    if p <= 1:
        raise DomainError("p must exceed 1")
    if f.description == "boundary_layer":
        return boundary_layer_quotient(field.domain, f.params["exponent"], p,
                                       f.params.get("cutoff"), layer)
    num, den, _, _ = _grid_terms(f, field, p)
    if den == 0:
        raise DomainError("zero trial function")
    return num / den


def _layer(domain, layer, resolution=None):
    if layer is None:
        if domain.truncated:
            raise PreconditionError("normal-coordinate integrals need a closed boundary")
        layer = gk.make_layer(domain, resolution)
    return layer


def layer_power_integral(layer, exponent, power, cutoff=None, weight_exp=0.0, derivative=False):
    """int |g|^power t^weight_exp over the domain, g = t^a eta(t/cutoff) or its t-derivative."""
    e = gk.Enrichment(exponent, -1, np.inf if cutoff is None else float(cutoff))
    a = exponent
    if derivative:
        coef = abs(a) ** power
        beta = power * (a - 1) + weight_exp
        smooth = lambda t: np.abs(e.slope(t)) ** power * t ** weight_exp
    else:
        coef = 1.0
        beta = power * a + weight_exp
        smooth = lambda t: np.abs(e.profile(t)) ** power * t ** weight_exp
    if beta <= -1:
        return np.inf
    return gk.layer_integral(layer, beta, coef, smooth, e.tau)


def boundary_layer_quotient(domain, exponent, p=2.0, cutoff=None, layer=None):
    """Exact quotient of f = delta^a eta(delta/cutoff) in normal coordinates."""
    layer = _layer(domain, layer)
    num = layer_power_integral(layer, exponent, p, cutoff, derivative=True)
    den = layer_power_integral(layer, exponent, p, cutoff, weight_exp=-p)
    if not np.isfinite(den):
        raise DomainError("trial function not in the weighted space (exponent too small)")
    return num / den


# -- best constants -------------------------------------------------------

def solve_mu(domain, field=None, opts=None, layer=None):
    """Assemble and solve the p = 2 eigenproblem; returns (report, system, eigen result)."""
    opts = opts or SolverOptions()
    h = opts.spacing if opts.spacing is not None else field.grid.spacing
    system = gk.assemble(domain, h, opts.mode, opts.alphas, layer=layer,
                         layer_resolution=opts.layer_resolution, field=field)
    res = gk.smallest_eigenpair(system.A, system.B, system.start_vector(), opts.tol,
                                opts.max_iter, opts.block, opts.seed)
    flags = list(system.flags)
    if not res.converged:
        flags.append(f"unconverged after {res.iterations} iterations")
    rep = QuotientReport(value=res.value, p=2.0, kind="mu_p", iterations=res.iterations,
                         history=res.history, grid_resolution=float(h), seed=int(opts.seed),
                         converged=res.converged, flags=flags,
                         extras={"ndof": int(system.ndof), "mode": system.mesh.mode,
                                 "enrichment": [e.describe() for e in system.enrichments]})
    return rep, system, res


def estimate_mu(domain, field=None, p=2.0, opts=None, layer=None):
    """Discrete best constant mu_p; p = 2 by eigen-solve, other p by descent (upper bound)."""
    if p <= 1:
        raise DomainError("p must exceed 1")
    if p == 2:
        return solve_mu(domain, field, opts, layer)[0]
    return minimize_quotient(domain, field, p, opts)


def _gauss_operators(system):
    """Sparse maps from Q1 dofs to values and gradients at the Gauss points."""
    import scipy.sparse as sp
    from itertools import product
    mesh = system.mesh
    d, h = mesh.ndim, mesh.spacing
    Q, qw = gk._gauss_rule(d)
    phi, dphi, corners = gk._q1_basis(Q, h)
    cells = mesh.cells
    nc, nq = len(cells), len(Q)
    strides = np.array([int(np.prod(mesh.node_shape[k + 1:])) for k in range(d)])
    dofs = mesh.node_dof[(cells[:, None, :] + corners[None]) @ strides]
    rows = np.repeat(np.arange(nc * nq).reshape(nc, nq), len(corners), axis=1).reshape(nc, nq, -1)
    cols = np.broadcast_to(dofs[:, None, :], rows.shape)
    keep = cols >= 0
    shape = (nc * nq, mesh.n_free)

    def op(local):
        vals = np.broadcast_to(local[None], rows.shape)
        return sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=shape)

    V = op(phi)
    D = [op(dphi[:, :, j]) for j in range(d)]
    P = (mesh.origin + h * (cells[:, None, :] + Q[None])).reshape(-1, d)
    dq, _, _, wq, _ = gk._mesh_geometry(mesh.domain, mesh.mode, P)
    vol = (qw[None, :] * wq.reshape(nc, nq) * h ** d).ravel()
    return V, D, vol, dq


def minimize_quotient(domain, field, p, opts=None):
    """L-BFGS descent of the p-quotient on the multilinear space (no enrichment).

    The start is the boundary-layer profile delta^((p-1)/p + 0.1). The result
    is an upper bound on the discrete infimum and is labelled as such.
    """
    opts = opts or SolverOptions()
    h = opts.spacing if opts.spacing is not None else field.grid.spacing
    system = gk.assemble(domain, h, opts.mode, alphas=())
    V, D, vol, dq = _gauss_operators(system)
    wden = vol * dq ** (-p)
    X = system.mesh.node_coords()[system.mesh.node_dof >= 0]
    d0 = gk._mesh_geometry(domain, system.mesh.mode, X)[0]
    u0 = d0 ** ((p - 1) / p + 0.1)
    u0 = u0 / np.max(u0)
    tiny = 1e-30

    def fg(u):
        grads = [Dj @ u for Dj in D]
        g2 = sum(g * g for g in grads) + tiny
        num = float(np.sum(vol * g2 ** (p / 2)))
        val = V @ u
        den = float(np.sum(wden * np.abs(val) ** p))
        gn = sum(Dj.T @ (p * vol * g2 ** (p / 2 - 1) * g) for Dj, g in zip(D, grads))
        gd = V.T @ (p * wden * np.sign(val) * np.abs(val) ** (p - 1))
        f = np.log(num) - np.log(den)
        return f, gn / num - gd / den

    hist = [float(np.exp(fg(u0)[0]))]

    def cb(u):
        hist.append(float(np.exp(fg(u)[0])))

    res = minimize(fg, u0, jac=True, method="L-BFGS-B", callback=cb,
                   options={"maxiter": opts.max_iter, "ftol": opts.tol, "gtol": 1e-10})
    best = float(np.exp(res.fun))
    conv = bool(res.success)
    flags = ["upper bound: descent on the multilinear space without boundary enrichment"]
    if not conv:
        flags.append(f"unconverged: {res.message}")
    return QuotientReport(value=best, p=float(p), kind="mu_p", iterations=int(res.nit),
                          history=hist, grid_resolution=float(h), seed=int(opts.seed),
                          converged=conv, upper_bound=True, flags=flags,
                          extras={"ndof": int(system.ndof), "mode": system.mesh.mode})


def estimate_bm_lambda(domain, field=None, opts=None, layer=None, mu_report=None):
    """Smallest eigenvalue of grad-energy minus 1/4 Hardy term against the L^2 mass.

    When the discrete Hardy constant is below 1/4 the form is indefinite and
    the report carries a breakdown flag with no value.
    """
    opts = opts or SolverOptions()
    h = opts.spacing if opts.spacing is not None else field.grid.spacing
    mu_rep, system, res = solve_mu(domain, field, opts, layer)
    flags = list(system.flags)
    if mu_rep.value < 0.25:
        flags.append(f"breakdown: indefinite form, discrete mu = {mu_rep.value:.8f} < 1/4")
        return QuotientReport(value=None, p=2.0, kind="bm_lambda", iterations=0, history=[],
                              grid_resolution=float(h), seed=int(opts.seed), converged=True,
                              flags=flags, extras={"mu": mu_rep.value, "breakdown": True})
    K = (system.A - 0.25 * system.B).tocsc()
    x0 = system.start_vector()
    r = gk.smallest_eigenpair(K, system.M, x0 / np.sqrt(x0 @ (system.M @ x0)), opts.tol,
                              opts.max_iter, opts.block, opts.seed)
    if not r.converged:
        flags.append(f"unconverged after {r.iterations} iterations")
    return QuotientReport(value=r.value, p=2.0, kind="bm_lambda", iterations=r.iterations,
                          history=r.history, grid_resolution=float(h), seed=int(opts.seed),
                          converged=r.converged, flags=flags,
                          extras={"mu": mu_rep.value, "breakdown": False, "ndof": int(system.ndof),
                                  "mode": system.mesh.mode})


# -- curvature lower bounds -----------------------------------------------

def lambda_factor(values, delta, p):
    """-Delta delta turned into the remainder constant: F/(2 delta) for p = 2."""
    if p == 2:
        return values / (2 * delta)
    return ((p - 1) / p) ** (p - 1) * values / delta ** (p - 1)


def lambda_curvature_bound(H0, n, p=2.0):
    """(2/n) H0^2 for p = 2, (p / n^(p-1)) H0^p otherwise."""
    return p * max(H0, 0.0) ** p / n ** (p - 1)


def lambda_lower_bound(field, lap, p=2.0, report=None):
    """inf over good nodes of the remainder factor of -Delta delta (grid mode)."""
    report = report or convexity_report(field.domain)
    if not report.weakly_mean_convex:
        raise PreconditionError(f"domain is not weakly mean convex (H0 = {report.H0:.6g})")
    good = lap.good_mask & np.isfinite(lap.neg_lap_formula) & (field.delta > 0)
    return float(np.min(lambda_factor(lap.neg_lap_formula[good], field.delta[good], p)))


@dataclass
class AnalyticLambda:
    value: float
    point: tuple
    delta: float
    samples: int
    kappa_min_sq: float


def lambda_analytic(domain, p=2.0, resolution=None, n_geom=120, n_lin=401, refine=5, require_convex=True):
    """inf over boundary points z and 0 < t < rho_bar(z) of the remainder factor.

    Uses the closed-form curvatures of the catalog kinds; no volume grid.
    t runs over a geometric grid down to 1e-8 rho_bar plus a uniform grid,
    and the best few samples are polished by a bounded scalar search.
    """
    if not domain.analytic:
        raise PreconditionError("analytic mode needs a catalog domain")
    if resolution is None:
        resolution = 2048 if domain.dim == 2 else 32
    if require_convex:
        rep = convexity_report(domain)
        if not rep.weakly_mean_convex:
            raise PreconditionError(f"domain is not weakly mean convex (H0 = {rep.H0:.6g})")
    S = domain.sample(resolution)
    rho, _ = ridge_distance(domain, S.points, -S.normals, domain.distance, S.spacing)
    u = np.unique(np.concatenate([np.geomspace(1e-8, 1.0, n_geom), np.linspace(0, 1, n_lin)[1:]]))
    u = np.minimum(u, 1 - 1e-9)
    T = rho[:, None] * u[None, :]
    K = S.kappas
    vals = np.empty(T.shape)
    for a in range(0, len(K), 2048):
        Tc = T[a:a + 2048]
        den = 1.0 - Tc[..., None] * K[a:a + 2048, None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            F = np.sum(K[a:a + 2048, None, :] / den, axis=-1)
        vals[a:a + 2048] = np.where(np.any(den <= 0, axis=-1), np.inf, lambda_factor(F, Tc, p))
    flat = np.argsort(vals.min(axis=1))[:refine]
    best = (np.inf, 0, 0.0)
    for i in flat:
        j = int(np.argmin(vals[i]))
        best = min(best, (float(vals[i, j]), int(i), float(T[i, j])))
        lo = T[i, max(j - 1, 0)] if j > 0 else 1e-12 * rho[i]
        hi = T[i, min(j + 1, T.shape[1] - 1)]
        if hi > lo:
            def g(t, k=K[i]):
                lhs, _, bad = curvature_sum_fields(k[None], np.array([t]))
                return np.inf if bad[0] else float(lambda_factor(lhs, t, p)[0])
            r = minimize_scalar(g, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12 * rho[i]})
            if r.fun < best[0]:
                best = (float(r.fun), int(i), float(r.x))
    kmin = float(np.min(np.abs(K)) ** 2)
    return AnalyticLambda(best[0], tuple(float(v) for v in S.points[best[1]]), best[2], len(S), kmin)


# -- remainder table ------------------------------------------------------

def sobolev_c(n):
    """(n+1)^((n-1)/(n+1)) |S_n|^(2/(n+1)) / 4."""
    return (n + 1) ** ((n - 1) / (n + 1)) * sphere_area(n) ** (2 / (n + 1)) / 4


def _diameter_scan(domain, resolution=256):
    from scipy.spatial import ConvexHull
    from scipy.spatial.distance import pdist
    P = domain.sample(resolution).points
    try:
        P = P[ConvexHull(P).vertices]
    except Exception:
        pass
    return float(pdist(P).max())


def remainder_table(domain, field=None, lam_curvature=None, resolution=None):
    """The six remainder constants with their inputs.

    diam, |Omega| and R_int are analytic for catalog kinds; otherwise they
    come from a support-point scan and the grid. lambda_curvature is the
    analytic-mode infimum for catalog kinds unless given.
    """
    n = domain.n
    flags, src = [], {}
    diam = domain.diameter()
    src["diameter"] = "analytic"
    if diam is None:
        diam = _diameter_scan(domain)
        src["diameter"] = "support-point scan"
    vol = domain.volume()
    src["volume"] = "analytic"
    if vol is None:
        vol = float(np.sum(field.inside) * field.grid.cell_volume)
        src["volume"] = "grid cell count"
    R = domain.interior_radius()
    src["R_int"] = "analytic"
    if R is None:
        R = float(np.max(field.delta[field.inside]))
        src["R_int"] = "grid max delta"
    if domain.truncated:
        flags.append("truncated domain: diameter and volume depend on the truncation")
    if lam_curvature is None:
        if domain.analytic:
            lam_curvature = lambda_analytic(domain, 2.0, resolution, require_convex=False).value
            src["lambda_curvature"] = "analytic mode"
        else:
            raise PreconditionError("pass lambda_curvature for implicit domains")
    else:
        src["lambda_curvature"] = "given"
    sa = sphere_area(n)
    c = sobolev_c(n)
    hhl = c / vol ** (2 / (n + 1))
    return RemainderTable(lambda_BM=1 / (4 * diam ** 2), lambda_HHL=hhl, lambda_FMT=0.75 / R ** 2,
                          lambda_EL=6 * hhl, lambda_AW=J0 ** 2 / R ** 2, lambda_curvature=float(lam_curvature),
                          diameter=float(diam), volume=float(vol), R_int=float(R), sphere_area=sa,
                          c_n=c, sources=src, flags=flags)


# -- identity and inequalities --------------------------------------------

@dataclass(frozen=True)
class IdentityResidual:
    residual: float
    lhs: float
    rhs: float
    energy: float

    @property
    def relative(self):
        return self.residual / self.energy if self.energy > 0 else 0.0


def central_gradient(values, spacing):
    """Second-order node-centred gradient, shape values.shape + (ndim,)."""
    return np.stack(np.gradient(values, spacing), axis=-1)


def identity_check_L2(f, field):
    """Both sides of int|grad f|^2 - 1/4 int f^2/delta^2
    = int |grad f - f grad delta/(2 delta)|^2 + int grad(f^2/(2 delta)).grad delta.

    Every gradient uses the same node-centred stencil, so all integrands live
    on the nodes and the residual is second order in the spacing.
    """
    h = field.grid.spacing
    vol = field.grid.cell_volume
    m = field.inside & (field.delta > 0)
    v = np.where(m, f.values, 0.0)
    d = np.where(m, field.delta, 1.0)
    Df = central_gradient(v, h)
    Dd = central_gradient(np.where(field.inside, field.delta, 0.0), h)
    Dg = central_gradient(np.where(m, v * v / (2 * d), 0.0), h)
    w = np.where(m, v / d, 0.0)
    energy = float(np.sum(Df ** 2) * vol)
    lhs = energy - 0.25 * float(np.sum(w ** 2) * vol)
    R = Df - (w / 2)[..., None] * Dd
    rhs = float(np.sum(R ** 2) * vol + np.sum(Dg * Dd) * vol)
    return IdentityResidual(abs(lhs - rhs), lhs, rhs, energy)


def vector_inequality_check(p, trials, seed, dims=(2, 3, 4)):
    """Count pairs with |X|^p - |Y|^p < p |Y|^(p-2) <X - Y, Y> beyond rounding."""
    if p <= 1:
        raise DomainError("p must exceed 1")
    rng = np.random.default_rng(seed)
    viol = 0
    per = [trials // len(dims) + (1 if i < trials % len(dims) else 0) for i in range(len(dims))]
    for d, m in zip(dims, per):
        X = rng.standard_normal((m, d)) * np.exp(rng.uniform(-3, 3, (m, 1)))
        Y = rng.standard_normal((m, d)) * np.exp(rng.uniform(-3, 3, (m, 1)))
        near = rng.random(m) < 0.2
        X[near] = Y[near] * (1 + 1e-3 * rng.standard_normal((int(near.sum()), 1)))
        nx, ny = np.linalg.norm(X, axis=1), np.linalg.norm(Y, axis=1)
        lhs = nx ** p - ny ** p
        rhs = p * ny ** (p - 2) * np.sum((X - Y) * Y, axis=1)
        scale = nx ** p + ny ** p + np.abs(rhs)
        viol += int(np.sum(lhs < rhs - 1e-12 * scale))
    return viol


@dataclass(frozen=True)
class CorrectedTerms:
    gradient: float
    correction: float
    hardy: float
    tolerance: float

    @property
    def margin(self):
        return self.gradient + self.correction - self.hardy

    @property
    def holds(self):
        return self.margin >= -self.tolerance


def corrected_terms(f, field, p, H0, rtol=1e-2):
    """int|grad f|^p + ((p-1)/p)^(p-1)|H0| int|f|^p/delta^(p-1) vs ((p-1)/p)^p int|f/delta|^p."""
    num, den, v, _ = _grid_terms(f, field, p)
    m = field.inside & (field.delta > 0)
    corr = ((p - 1) / p) ** (p - 1) * abs(H0) * float(
        np.sum(np.abs(v[m]) ** p / field.delta[m] ** (p - 1)) * field.grid.cell_volume)
    hardy = hardy_constant(p) * den
    return CorrectedTerms(num, corr, hardy, rtol * (num + corr))


def corrected_inequality_check(domain, field, p, trials, seed, report=None, rtol=1e-2):
    """Violations of the corrected Hardy inequality over random bumps (needs H0 < 0)."""
    report = report or convexity_report(domain)
    if report.H0 >= 0:
        raise PreconditionError("corrected inequality is for H0 < 0; use the plain sharp inequality")
    fs = bump_trials(field, trials, seed)
    return sum(0 if corrected_terms(f, field, p, report.H0, rtol).holds else 1 for f in fs)


@dataclass(frozen=True)
class FormCheck:
    plain: float
    corrected: float


def corrected_form_check(system, coef, H0):
    """p = 2 margins of the plain and corrected inequalities for a Galerkin function, exactly."""
    a = float(coef @ (system.A @ coef))
    b = float(coef @ (system.B @ coef))
    c = float(coef @ (system.C @ coef))
    plain = a - 0.25 * b
    return FormCheck(plain, plain + 0.5 * abs(min(H0, 0.0)) * c)


# -- Hardy-Sobolev --------------------------------------------------------

def hs_exponents(dim, p, q):
    """Check the exponent range in the ambient dimension and return the weight exponent."""
    N = dim
    if not (2 <= p < N):
        raise DomainError(f"need 2 <= p < {N} (ambient dimension)")
    qmax = p * N / (N - p)
    if not (p < q <= qmax + 1e-12):
        raise DomainError(f"need {p} < q <= {qmax}")
    return -q + N * (q - p) / p


def hardy_sobolev_quotient(domain, field, f, p, q, layer=None):
    """(int|grad f|^p - ((p-1)/p)^p int|f/delta|^p) / (int delta^w |f|^q)^(p/q).

    Exponent constraints are read in the ambient dimension of the domain.
    Boundary-layer trials use normal coordinates, eigen iterates use the
    exact Galerkin forms for the numerator (p = 2), grid trials use
    forward differences.
    """
    w = hs_exponents(domain.dim, p, q)
    if f.description == "boundary_layer":
        layer = _layer(domain, layer)
        a, cut = f.params["exponent"], f.params.get("cutoff")
        num = (layer_power_integral(layer, a, p, cut, derivative=True)
               - hardy_constant(p) * layer_power_integral(layer, a, p, cut, weight_exp=-p))
        den = layer_power_integral(layer, a, q, cut, weight_exp=w)
    elif f.description == "eigen_iterate" and f.system is not None:
        if p != 2:
            raise DomainError("eigen iterates are p = 2 objects")
        s, c = f.system, f.coef
        num = float(c @ (s.A @ c) - 0.25 * (c @ (s.B @ c)))
        den = _galerkin_power(s, c, q, w)
    else:
        n, dd, v, _ = _grid_terms(f, field, p)
        num = n - hardy_constant(p) * dd
        m = field.inside & (field.delta > 0)
        den = float(np.sum(field.delta[m] ** w * np.abs(v[m]) ** q) * field.grid.cell_volume)
    if den <= 0:
        raise DomainError("zero trial function")
    return num / den ** (p / q)


def _galerkin_power(system, coef, q, w, npts=2):
    """int delta^w |u|^q over all mesh cells by a tensor Gauss rule."""
    from itertools import product
    mesh = system.mesh
    d, h = mesh.ndim, mesh.spacing
    Q, qw = gk._gauss_rule(d, npts)
    cells = np.array(list(product(*[range(n) for n in mesh.dims])))
    P = (mesh.origin + h * (cells[:, None, :] + Q[None])).reshape(-1, d)
    dq, _, _, wq, ins = gk._mesh_geometry(mesh.domain, mesh.mode, P)
    u = system.evaluate(coef, P)
    vol = np.tile(qw, len(cells)) * wq * h ** d
    m = ins & (dq > 0)
    return float(np.sum(vol[m] * dq[m] ** w * np.abs(u[m]) ** q))
