"""Conforming Q1 elements with boundary-layer enrichment.

The trial space is piecewise multilinear on grid cells that keep one cell
of clearance from the boundary, plus a few functions of the distance,
t^alpha with alpha slightly above 1/2, that carry the behaviour near the
boundary which the cells cannot resolve. Integrals involving only the
enrichment functions are done in normal coordinates around the boundary,
in closed form wherever the integrand is a power of t. Mixed integrals use
tensor Gauss rules on the cells with the exact distance and its gradient.

Two layouts are supported: ``planar`` (the grid lives in the ambient
space) and ``axisym`` (a rotation-invariant 3D domain is represented by its
meridian half-plane (rho, z), with the weight 2 pi rho).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.polynomial.legendre import leggauss
from scipy.linalg import eigh

from .distfield import ridge_distance
from .errors import PreconditionError
from .parallel import chunked_rows
from .symfun import sigma_rows

GAUSS_POINTS = 4
LAYER_POINTS = 48
DEFAULT_ALPHAS = (0.75, 0.55, 0.505)


def eta(s):
    """C^1 cutoff: 1 below 1/2, cos^2 ramp to 0 at 1."""
    s = np.asarray(s, dtype=float)
    return np.where(s < 0.5, 1.0, np.where(s < 1.0, np.cos(np.pi * (s - 0.5)) ** 2, 0.0))


def eta_prime(s):
    s = np.asarray(s, dtype=float)
    return np.where((s >= 0.5) & (s < 1.0), -np.pi * np.sin(2 * np.pi * (s - 0.5)), 0.0)


@dataclass(frozen=True)
class Enrichment:
    """psi(x) = t^alpha eta(t/tau) with t = delta(x), restricted to one boundary component."""

    alpha: float
    component: int = -1
    tau: float = np.inf

    def profile(self, t):
        t = np.asarray(t, dtype=float)
        if np.isinf(self.tau):
            return t ** self.alpha
        return t ** self.alpha * eta(t / self.tau)

    def slope(self, t):
        t = np.asarray(t, dtype=float)
        if np.isinf(self.tau):
            return self.alpha * t ** (self.alpha - 1)
        s = t / self.tau
        return self.alpha * t ** (self.alpha - 1) * eta(s) + t ** self.alpha * eta_prime(s) / self.tau

    def describe(self):
        return {"alpha": self.alpha, "component": self.component,
                "tau": None if np.isinf(self.tau) else self.tau}


# -- normal-coordinate integrals --------------------------------------------

@dataclass
class Layer:
    """Boundary quadrature with the ridge distance of every sample."""

    kappas: np.ndarray
    weights: np.ndarray
    rho_bar: np.ndarray
    component: np.ndarray

    def subset(self, component):
        if component < 0:
            return self
        m = self.component == component
        return Layer(self.kappas[m], self.weights[m], self.rho_bar[m], self.component[m])


def make_layer(domain, resolution=None, field=None):
    """Sample the boundary and find rho_bar along each inward normal."""
    if resolution is None:
        resolution = 4096 if domain.dim == 2 else 192
    S = domain.sample(resolution)
    if domain.analytic:
        fn = domain.distance
        h = S.spacing
        eps = None
    else:
        if field is None:
            raise PreconditionError("implicit domains need a distance field for the ridge")
        fn = field.interpolator()
        h = field.grid.spacing
        eps = 0.5 * h
    rho, _ = ridge_distance(domain, S.points, -S.normals, fn, h, eps=eps)
    return Layer(S.kappas, S.weights, rho, S.component)


def layer_integral(layer, beta, coef=1.0, smooth=None, tau=np.inf, upper=None, nq=LAYER_POINTS):
    """Sum_z w_z int_0^{T_z} F(t) prod_i(1 - t k_i(z)) dt.

    F(t) = coef * t^beta on [0, tau/2] (closed form through the elementary
    symmetric functions of the curvatures) and F = smooth(t) on [tau/2, tau]
    (Gauss-Legendre). T_z = min(rho_bar(z), tau) unless ``upper`` is given.
    """
    K = layer.kappas
    n = K.shape[1]
    T = layer.rho_bar if upper is None else np.broadcast_to(upper, layer.rho_bar.shape)
    T = np.minimum(T, tau)
    T1 = np.minimum(T, 0.5 * tau)
    sig = sigma_rows(K)
    j = np.arange(n + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        pw = np.where(T1[:, None] > 0, T1[:, None] ** (beta + j + 1), 0.0)
    inner = np.sum(((-1.0) ** j) * sig * pw / (beta + j + 1), axis=1)
    total = coef * float(np.sum(layer.weights * inner))
    if smooth is not None and np.isfinite(tau):
        lo = 0.5 * tau
        m = T > lo
        if np.any(m):
            g, gw = leggauss(nq)
            g, gw = 0.5 * (g + 1), 0.5 * gw
            L = T[m] - lo
            t = lo + L[:, None] * g[None, :]
            J = np.prod(1.0 - t[..., None] * K[m][:, None, :], axis=-1)
            total += float(np.sum(layer.weights[m] * L * np.sum(gw * smooth(t) * J, axis=1)))
    return total


def _pair_integrals(layer, e, f):
    """Exact (A, W2, W1, W0) integrals of the enrichment pair: psi_e' psi_f' and psi_e psi_f t^-k."""
    a, b = e.alpha, f.alpha
    tau = e.tau
    out = [layer_integral(layer, a + b - 2, a * b, lambda t: e.slope(t) * f.slope(t), tau)]
    for k in (2, 1, 0):
        out.append(layer_integral(layer, a + b - k, 1.0,
                                  lambda t, k=k: e.profile(t) * f.profile(t) * t ** (-k), tau))
    return out


# -- mesh -----------------------------------------------------------------

def _gauss_rule(d, npts=GAUSS_POINTS):
    g, w = leggauss(npts)
    g, w = 0.5 * (g + 1), 0.5 * w
    Q = np.array(list(product(g, repeat=d)))
    W = np.prod(np.array(list(product(w, repeat=d))), axis=1)
    return Q, W


def _q1_basis(Q, h):
    """Values (nq, 2^d) and gradients (nq, 2^d, d) of the multilinear basis on a cell of side h."""
    nq, d = Q.shape
    corners = np.array(list(product((0, 1), repeat=d)))
    F = np.where(corners[None, :, :] == 1, Q[:, None, :], 1.0 - Q[:, None, :])
    phi = np.prod(F, axis=2)
    dphi = np.empty((nq, len(corners), d))
    for j in range(d):
        G = F.copy()
        G[:, :, j] = np.where(corners[None, :, j] == 1, 1.0, -1.0) / h
        dphi[:, :, j] = np.prod(G, axis=2)
    return phi, dphi, corners


def _mesh_geometry(domain, mode, P):
    """(delta, grad delta, component, volume weight) at mesh points."""
    def run(Pc):
        if mode == "axisym":
            X = np.stack([Pc[:, 0], np.zeros(len(Pc)), Pc[:, 1]], axis=1)
            delta, _, comp, nrm, _ = domain.geometry(X)
            return delta, -nrm[:, [0, 2]], comp.astype(float), 2 * np.pi * Pc[:, 0], domain.inside(X).astype(float)
        delta, _, comp, nrm, _ = domain.geometry(Pc)
        return delta, -nrm, comp.astype(float), np.ones(len(Pc)), domain.inside(Pc).astype(float)
    delta, grad, comp, w, ins = chunked_rows(run, P)
    return delta, grad, comp.astype(int), w, ins > 0


@dataclass
class Mesh:
    domain: object
    mode: str
    origin: np.ndarray
    spacing: float
    dims: tuple
    cells: np.ndarray
    node_dof: np.ndarray
    clearance: float

    @property
    def ndim(self):
        return len(self.dims)

    @property
    def node_shape(self):
        return tuple(n + 1 for n in self.dims)

    @property
    def n_free(self):
        return int(np.sum(self.node_dof >= 0))

    def node_coords(self):
        axes = [self.origin[k] + self.spacing * np.arange(n) for k, n in enumerate(self.node_shape)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.ndim)


def choose_mode(domain, mode=None):
    if mode is not None:
        if mode == "axisym" and not domain.axisymmetric:
            raise PreconditionError("axisym layout needs a rotation-invariant 3D domain")
        return mode
    return "axisym" if domain.axisymmetric else "planar"


def make_mesh(domain, spacing, mode=None, clearance=1.0):
    """Active cells keep delta >= clearance*h at corners and Gauss points."""
    mode = choose_mode(domain, mode)
    lo, hi = domain.bounding_box
    if mode == "axisym":
        lo = np.array([0.0, lo[2]])
        hi = np.array([max(abs(domain.bounding_box[0][0]), domain.bounding_box[1][0],
                           abs(domain.bounding_box[0][1]), domain.bounding_box[1][1]), hi[2]])
    h = float(spacing)
    dims = tuple(int(v) for v in np.ceil((hi - lo) / h - 1e-9))
    d = len(dims)
    mesh = Mesh(domain, mode, np.asarray(lo, dtype=float), h, dims,
                np.zeros((0, d), dtype=int), np.zeros(0, dtype=int), clearance)
    Xn = mesh.node_coords()
    dn, _, _, _, insn = _mesh_geometry(domain, mode, Xn)
    ok_node = (insn & (dn >= clearance * h - 1e-12)).reshape(mesh.node_shape)
    corners = np.array(list(product((0, 1), repeat=d)))
    sl = [tuple(slice(c, c + n) for c, n in zip(cr, dims)) for cr in corners]
    ok_cell = np.logical_and.reduce([ok_node[s] for s in sl])
    cand = np.argwhere(ok_cell)
    Q, _ = _gauss_rule(d)
    P = (lo + h * (cand[:, None, :] + Q[None])).reshape(-1, d)
    dq, _, _, _, insq = _mesh_geometry(domain, mode, P)
    good = np.all(((dq >= clearance * h) & insq).reshape(len(cand), -1), axis=1)
    cells = cand[good]
    strides = np.array([int(np.prod(mesh.node_shape[k + 1:])) for k in range(d)])
    idx = (cells[:, None, :] + corners[None]) @ strides
    count = np.bincount(idx.ravel(), minlength=int(np.prod(mesh.node_shape)))
    need = np.full(count.shape, 2 ** d)
    if mode == "axisym":
        on_axis = np.zeros(mesh.node_shape, dtype=bool)
        on_axis[0] = True
        need[on_axis.ravel()] = 2 ** (d - 1)
    free = count >= need
    dof = np.full(count.shape, -1)
    dof[free] = np.arange(int(free.sum()))
    mesh.cells = cells
    mesh.node_dof = dof
    return mesh


# -- assembly -------------------------------------------------------------

@dataclass
class System:
    """Discrete forms on the enriched space; unknowns are [Q1 nodes | enrichment]."""

    mesh: Mesh
    enrichments: list
    A: sp.csc_matrix
    B: sp.csc_matrix
    C: sp.csc_matrix
    M: sp.csc_matrix
    flags: list = field(default_factory=list)

    @property
    def n_free(self):
        return self.mesh.n_free

    @property
    def ndof(self):
        return self.A.shape[0]

    def start_vector(self):
        """Normalised delta^(1/2) profile: nodal values on Q1 dofs, zero enrichment weights."""
        X = self.mesh.node_coords()[self.mesh.node_dof >= 0]
        dn = _mesh_geometry(self.mesh.domain, self.mesh.mode, X)[0]
        v = np.concatenate([np.sqrt(dn), np.zeros(len(self.enrichments))])
        return v / np.sqrt(v @ (self.M @ v))

    def evaluate(self, coef, X):
        """Values of the discrete function at points given in mesh coordinates."""
        mesh = self.mesh
        X = np.atleast_2d(np.asarray(X, dtype=float))
        d = mesh.ndim
        h = mesh.spacing
        rel = (X - mesh.origin) / h
        base = np.clip(np.floor(rel).astype(int), 0, np.array(mesh.dims) - 1)
        frac = rel - base
        corners = np.array(list(product((0, 1), repeat=d)))
        strides = np.array([int(np.prod(mesh.node_shape[k + 1:])) for k in range(d)])
        full = np.zeros(len(mesh.node_dof))
        full[mesh.node_dof >= 0] = coef[:self.n_free]
        out = np.zeros(len(X))
        inside_box = np.all((rel >= 0) & (rel <= np.array(mesh.dims)), axis=1)
        for cr in corners:
            wgt = np.prod(np.where(cr == 1, frac, 1 - frac), axis=1)
            out += wgt * full[(base + cr) @ strides]
        out = np.where(inside_box, out, 0.0)
        if self.enrichments:
            dl, _, comp, _, ins = _mesh_geometry(mesh.domain, mesh.mode, X)
            for k, e in enumerate(self.enrichments):
                on = ins if e.component < 0 else ins & (comp == e.component)
                out += coef[self.n_free + k] * np.where(on, e.profile(np.where(on, dl, 1.0)), 0.0)
        return out


def default_enrichments(domain, layer, alphas=DEFAULT_ALPHAS):
    """Global powers of delta for one boundary component, cut-off powers per component otherwise."""
    if domain.truncated or not alphas:
        return []
    if domain.n_components == 1:
        return [Enrichment(float(a)) for a in alphas]
    out = []
    for c in range(domain.n_components):
        rho = layer.rho_bar[layer.component == c]
        tau = float(rho.min())
        out.extend(Enrichment(float(a), c, tau) for a in alphas)
    return out


def assemble(domain, spacing, mode=None, alphas=DEFAULT_ALPHAS, clearance=1.0,
             layer=None, layer_resolution=None, field=None):
    """Build stiffness A and the mass forms with weights delta^-2 (B), delta^-1 (C), 1 (M)."""
    mesh = make_mesh(domain, spacing, mode, clearance)
    flags = []
    if domain.truncated and alphas:
        flags.append("boundary-layer enrichment disabled on a truncated domain")
    enr = []
    if alphas and not domain.truncated:
        if layer is None:
            layer = make_layer(domain, layer_resolution, field)
        enr = default_enrichments(domain, layer, alphas)
    d = mesh.ndim
    h = mesh.spacing
    Q, qw = _gauss_rule(d)
    phi, dphi, corners = _q1_basis(Q, h)
    cells = mesh.cells
    nc = len(cells)
    P = (mesh.origin + h * (cells[:, None, :] + Q[None])).reshape(-1, d)
    dq, gq, cq, wq, _ = _mesh_geometry(domain, mesh.mode, P)
    shape = (nc, len(Q))
    dq, cq, wq = dq.reshape(shape), cq.reshape(shape), wq.reshape(shape)
    gq = gq.reshape(shape + (d,))
    vol = qw[None, :] * wq * h ** d
    strides = np.array([int(np.prod(mesh.node_shape[k + 1:])) for k in range(d)])
    dofs = mesh.node_dof[(cells[:, None, :] + corners[None]) @ strides]
    nf = mesh.n_free
    m = len(enr)
    nb = len(corners)

    rows = np.repeat(dofs, nb, axis=1).ravel()
    cols = np.tile(dofs, (1, nb)).ravel()
    keep = (rows >= 0) & (cols >= 0)
    rows, cols = rows[keep], cols[keep]

    def q1(local):
        return sp.csr_matrix((local.reshape(-1)[keep], (rows, cols)), shape=(nf, nf))

    stiff = q1(np.einsum("cq,qaj,qbj->cab", vol, dphi, dphi))
    masses = [q1(np.einsum("cq,qa,qb->cab", vol * dq ** (-k), phi, phi)) for k in (2, 1, 0)]

    cross = np.zeros((4, nf, m))
    flat = dofs.ravel()
    okd = flat >= 0
    for k, e in enumerate(enr):
        on = np.ones(shape, dtype=bool) if e.component < 0 else (cq == e.component)
        psi = np.where(on, e.profile(dq), 0.0)
        dpsi = np.where(on, e.slope(dq), 0.0)
        va = np.einsum("cq,cqj,qaj->ca", vol * dpsi, gq, dphi).ravel()
        cross[0, :, k] = np.bincount(flat[okd], weights=va[okd], minlength=nf)
        for i, kk in enumerate((2, 1, 0)):
            vb = np.einsum("cq,qa->ca", vol * psi * dq ** (-kk), phi).ravel()
            cross[i + 1, :, k] = np.bincount(flat[okd], weights=vb[okd], minlength=nf)
    block = np.zeros((4, m, m))
    for k, e in enumerate(enr):
        for l, f in enumerate(enr):
            if l < k or e.component != f.component:
                continue
            vals = _pair_integrals(layer.subset(e.component), e, f)
            for i in range(4):
                block[i, k, l] = block[i, l, k] = vals[i]

    def join(X, i):
        if m == 0:
            return X.tocsc()
        E = sp.csr_matrix(cross[i])
        return sp.bmat([[X, E], [E.T, sp.csr_matrix(block[i])]], format="csc")

    A, B, C, M = (join(stiff, 0), join(masses[0], 1), join(masses[1], 2), join(masses[2], 3))
    return System(mesh, enr, A, B, C, M, flags)


# -- eigen solver ---------------------------------------------------------

@dataclass
class EigenResult:
    value: float
    vector: np.ndarray
    iterations: int
    history: list
    converged: bool


def smallest_eigenpair(A, M, x0, tol=1e-8, maxiter=500, block=4, seed=0, shift=0.0):
    """Smallest eigenvalue of A x = lam M x by block inverse iteration.

    Each step solves with an exact sparse factorisation of A - shift*M and
    takes Rayleigh-Ritz values on the block, so the smallest Ritz value
    decreases monotonically. The first column starts at ``x0``, the others
    at seeded perturbations of it. Convergence: relative change of the
    smallest Ritz value at most ``tol``.
    """
    n = A.shape[0]
    lu = spla.splu((A - shift * M).tocsc())
    rng = np.random.default_rng(seed)
    X = np.empty((n, block))
    X[:, 0] = x0
    X[:, 1:] = (rng.standard_normal((n, block - 1)) * (np.abs(x0)[:, None] + 1e-3))
    hist = []
    conv = False
    vals = vecs = None
    for it in range(1, maxiter + 1):
        Y = lu.solve(np.asarray(M @ X))
        Y, _ = np.linalg.qr(Y)
        Ar = Y.T @ (A @ Y)
        Mr = Y.T @ (M @ Y)
        vals, vecs = eigh(0.5 * (Ar + Ar.T), 0.5 * (Mr + Mr.T))
        X = Y @ vecs
        hist.append(float(vals[0]))
        if it > 1 and abs(hist[-1] - hist[-2]) <= tol * abs(hist[-1]):
            conv = True
            break
    v = X[:, 0]
    v = v / np.sqrt(v @ (M @ v))
    if np.sum(v) < 0:
        v = -v
    return EigenResult(hist[-1], v, len(hist), hist, conv)
