"""The Laplacian of the distance function and the inequalities it obeys.

On the good set -Delta delta is given by the principal curvatures at the
nearest boundary point, sum k_i / (1 - delta k_i). This module evaluates
that formula, checks it against a finite-difference stencil, and tests the
distributional lower bound n H / (n - delta H) with smooth bump functions.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distfield import boundary_layer_mask
from .errors import PreconditionError
from .symfun import curvature_sum_fields


@dataclass
class LaplacianField:
    neg_lap_formula: np.ndarray
    neg_lap_fd: np.ndarray
    bound_field: np.ndarray
    good_mask: np.ndarray
    inconsistent_mask: np.ndarray
    flags: list = field(default_factory=list)

    @property
    def inconsistent_count(self):
        return int(self.inconsistent_mask.sum())


def neg_laplacian_formula(field, domain=None, max_inconsistent=1e-3):
    """-Delta delta from the curvature formula on inside, non-singular nodes.

    Nodes where some 1 - delta k_i <= 0 off the singular set are flagged as
    inconsistent. More than ``max_inconsistent`` of the good nodes
    (a fraction) is recorded in ``flags`` as a failed run.
    """
    g = field.grid
    ins = g.inside_mask
    good = ins & ~field.singular_mask
    lhs, rhs, bad = curvature_sum_fields(field.kappas[good], field.delta[good])
    F = np.full(g.dims, np.nan)
    B = np.full(g.dims, np.nan)
    F[good] = lhs
    B[good] = rhs
    inc = np.zeros(g.dims, dtype=bool)
    inc[good] = bad
    flags = []
    if good.any() and bad.sum() > max_inconsistent * good.sum():
        flags.append(f"inconsistent cells: {int(bad.sum())} of {int(good.sum())} good cells")
    fd = neg_laplacian_fd(field)
    return LaplacianField(neg_lap_formula=F, neg_lap_fd=fd, bound_field=B,
                          good_mask=good & ~inc, inconsistent_mask=inc, flags=flags)


def neg_laplacian_fd(field, layers=3):
    """Centred second differences of delta, masked within ``layers`` cells of S and the outside."""
    g = field.grid
    u = np.where(g.inside_mask, field.delta, 0.0)
    lap = np.zeros(g.dims)
    for ax in range(g.ndim):
        lap += np.roll(u, 1, axis=ax) + np.roll(u, -1, axis=ax) - 2 * u
    lap /= g.spacing ** 2
    ok = boundary_layer_mask(field, layers)
    return np.where(ok, -lap, np.nan)


def fd_agreement(lap, field, layers=3, floor=1e-9):
    """Max relative gap |formula - fd| / max(|formula|, |fd|) on the checked nodes.

    A tiny absolute floor keeps exact zeros (flat faces) from dividing by zero.
    """
    ok = boundary_layer_mask(field, layers) & lap.good_mask & np.isfinite(lap.neg_lap_fd)
    a = lap.neg_lap_formula[ok]
    b = lap.neg_lap_fd[ok]
    rel = np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    rel = np.where(np.abs(a - b) <= floor, 0.0, rel)
    return float(rel.max()) if rel.size else 0.0, int(ok.sum())


@dataclass(frozen=True)
class TestFunction:
    """Smooth bump A exp(1 - 1/(1 - |x-c|^2/r^2)) supported in the ball B(c, r)."""

    center: tuple
    radius: float
    amplitude: float = 1.0

    __test__ = False

    def values(self, X):
        X = np.atleast_2d(X)
        s = np.sum((X - np.asarray(self.center)) ** 2, axis=1) / self.radius ** 2
        out = np.zeros(len(X))
        m = s < 1
        out[m] = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - s[m]))
        return out

    def gradient(self, X):
        X = np.atleast_2d(X)
        D = X - np.asarray(self.center)
        s = np.sum(D ** 2, axis=1) / self.radius ** 2
        out = np.zeros_like(D)
        m = s < 1
        v = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - s[m]))
        coef = -v / (1.0 - s[m]) ** 2 * 2.0 / self.radius ** 2
        out[m] = coef[:, None] * D[m]
        return out

    @property
    def max_value(self):
        return self.amplitude


def random_bumps(domain, field, count, seed, min_cells=8, max_frac=0.9):
    """Random bumps with support strictly inside the domain and off the truncation faces."""
    rng = np.random.default_rng(seed)
    g = field.grid
    h = g.spacing
    X = g.nodes()[g.inside_mask]
    dist = field.delta[g.inside_mask]
    gap = domain.truncation_gap(X)
    room = np.minimum(dist, gap)
    cand = np.flatnonzero(room > (min_cells + 2) * h / max_frac)
    out = []
    while len(out) < count:
        i = cand[rng.integers(len(cand))]
        c = X[i] + rng.uniform(-0.5, 0.5, size=g.ndim) * h
        rmax = max_frac * min(float(domain.distance(c[None])[0]) if domain.analytic else room[i],
                              float(domain.truncation_gap(c[None])[0]))
        rmin = min_cells * h
        if rmax <= rmin:
            continue
        r = float(rng.uniform(rmin, rmax))
        out.append(TestFunction(tuple(float(v) for v in c), r, float(rng.uniform(0.5, 2.0))))
    return out


@dataclass(frozen=True)
class ResidualReport:
    residual: float
    eps_quad: float
    max_phi: float
    support_measure: float


def _bound(K, d, n):
    H = K.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return n * H / (n - d * H)


def _subcell_integrand(domain, X, h, phi, sub):
    """Cell averages of grad(delta).grad(phi) - bound * phi from sub^d interior points."""
    d = X.shape[1]
    offs = (np.arange(sub) + 0.5) / sub - 0.5
    O = np.stack(np.meshgrid(*([offs] * d), indexing="ij"), axis=-1).reshape(-1, d) * h
    P = (X[:, None, :] + O[None]).reshape(-1, d)
    delta, _, _, nrm, K = domain.geometry(P)
    val = np.sum(-nrm * phi.gradient(P), axis=1) - _bound(K, delta, domain.n) * phi.values(P)
    return val.reshape(len(X), -1).mean(axis=1)


def distributional_check(field, lap, phis, sub=4):
    """Residual int grad(delta).grad(phi) - int (n H/(n - delta H)) phi for each bump.

    Node-based midpoint quadrature over the cells. On singular nodes, where
    grad delta jumps and the bound may be unbounded but integrable, the cell
    value is replaced by an average over ``sub``^d interior points using the
    exact geometry. The contract is residual >= -eps_quad, where
    eps_quad = (sqrt(d)/2) h |supp| max|grad integrand| and the gradient
    maximum skips nodes next to the singular set.
    """
    g = field.grid
    ins = g.inside_mask
    X = g.nodes()[ins]
    dvol = g.cell_volume
    n = field.domain.n
    grad = field.grad_delta[ins]
    bound = _bound(field.kappas[ins], field.delta[ins], n)
    st = np.ones((3,) * g.ndim, dtype=bool)
    from scipy.ndimage import binary_dilation
    smooth = ins & ~binary_dilation(field.singular_mask, structure=st)
    sing = field.singular_mask[ins]
    out = []
    for phi in phis:
        if np.any(field.domain.truncation_gap(np.asarray(phi.center)[None]) <= phi.radius):
            raise PreconditionError("test function support touches a truncation face")
        v = phi.values(X)
        sup = v > 0
        integrand = np.zeros(len(X))
        gv = phi.gradient(X[sup])
        integrand[sup] = np.sum(grad[sup] * gv, axis=1) - bound[sup] * v[sup]
        ss = np.flatnonzero(sup & sing)
        if ss.size:
            integrand[ss] = _subcell_integrand(field.domain, X[ss], g.spacing, phi, sub)
        res = float(np.sum(integrand) * dvol)
        full = np.zeros(g.dims)
        full[ins] = integrand
        gmax = 0.0
        for ax in range(g.ndim):
            diff = np.abs(np.diff(full, axis=ax)) / g.spacing
            a = [slice(None)] * g.ndim
            b = [slice(None)] * g.ndim
            a[ax], b[ax] = slice(0, -1), slice(1, None)
            both = smooth[tuple(a)] & smooth[tuple(b)]
            if both.any():
                gmax = max(gmax, float(diff[both].max()))
        meas = float(sup.sum() * dvol)
        eps = 0.5 * np.sqrt(g.ndim) * g.spacing * meas * gmax
        out.append(ResidualReport(residual=res, eps_quad=float(eps),
                                  max_phi=float(phi.max_value), support_measure=meas))
    return out


@dataclass(frozen=True)
class InfEquivalence:
    inf_neg_lap: float
    inf_H: float
    tolerance: float
    agree: bool
    verdict_mean_convex: bool


def inf_equivalence(field, lap, report):
    """Compare inf of -Delta delta over good nodes with the boundary H0.

    The infimum of the formula is approached as delta -> 0, so the grid value
    exceeds H0 by about h * max sum k_i^2; that, plus the sampling margin of
    the convexity report, is the tolerance.
    """
    good = lap.good_mask & np.isfinite(lap.neg_lap_formula)
    vals = lap.neg_lap_formula[good]
    inf_lap = float(vals.min())
    K = field.kappas[good]
    kk = float(np.max(np.sum(K ** 2, axis=1))) if K.size else 0.0
    dmin = float(field.delta[good].min())
    tol = 2.0 * max(field.grid.spacing, dmin) * kk + report.margin + 1e-9 * (1 + abs(report.H0))
    agree = abs(inf_lap - report.H0) <= tol
    verdict = inf_lap >= -report.tol
    return InfEquivalence(inf_neg_lap=inf_lap, inf_H=float(report.H0), tolerance=float(tol),
                          agree=bool(agree), verdict_mean_convex=bool(verdict))


def growth_coefficient(p, H0, n):
    """p H0^p / n^(p-1) * (p/(p-1))^(p-1)."""
    return p * H0 ** p / n ** (p - 1) * (p / (p - 1)) ** (p - 1)


def growth_estimate_check(field, lap, p, H0, rtol=1e-9):
    """Count good nodes where -Delta delta < coefficient * delta^(p-1) beyond tolerance."""
    if H0 < 0:
        raise PreconditionError("growth estimate needs a weakly mean convex domain (H0 >= 0)")
    if p <= 1:
        raise PreconditionError("growth estimate needs p > 1")
    n = field.domain.n
    good = lap.good_mask & np.isfinite(lap.neg_lap_formula)
    v = lap.neg_lap_formula[good]
    b = growth_coefficient(p, H0, n) * field.delta[good] ** (p - 1)
    viol = v < b - rtol * (1 + np.abs(b))
    return int(viol.sum())


def ray_monotonicity(domain, samples, rho_bar, steps=64):
    """Count decreases of sum k_i/(1 - t k_i) along inward normals up to rho_bar."""
    viol = 0
    for i in range(len(samples)):
        t = np.linspace(0, rho_bar[i], steps, endpoint=False)
        K = np.repeat(samples.kappas[i][None], steps, axis=0)
        lhs, _, bad = curvature_sum_fields(K, t)
        lhs = lhs[~bad]
        viol += int(np.sum(np.diff(lhs) < -1e-12 * (1 + np.abs(lhs[1:]))))
    return viol
