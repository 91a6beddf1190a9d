"""Catalog of domains with exact boundary geometry.

Every domain answers the same questions about a point set X of shape (m, d):
is the point inside, what is its distance to the boundary, where is its
nearest boundary point, and what are the outward normal and the principal
curvatures there. Curvatures are taken with respect to the outward normal,
so the unit sphere in R^(n+1) has mean curvature H = n.

Unbounded kinds are cut off by their bounding box. The cut faces are not
part of the boundary; ``truncation_gap`` measures the distance to them so
that callers can keep their supports away.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import gamma, pi

import numpy as np

from .errors import ConfigurationError, DomainError
from .exprlang import LevelSet
from .symfun import SymVector


def sphere_area(n):
    """Area |S_n| of the unit n-sphere in R^(n+1)."""
    return 2.0 * pi ** ((n + 1) / 2.0) / gamma((n + 1) / 2.0)


def ball_volume(d, R=1.0):
    return pi ** (d / 2.0) / gamma(d / 2.0 + 1.0) * R ** d


def tangent_basis(normals):
    """Orthonormal bases of the planes orthogonal to each row of ``normals``."""
    N = np.atleast_2d(normals)
    m, d = N.shape
    if d == 2:
        return np.stack([-N[:, 1], N[:, 0]], axis=-1)[:, :, None]
    A = np.concatenate([N[:, :, None], np.broadcast_to(np.eye(d), (m, d, d))], axis=2)
    Q, _ = np.linalg.qr(A)
    return Q[:, :, 1:d]


def shape_operator_curvatures(grad, hess):
    """Principal curvatures of the level set of phi with outward normal grad phi.

    ``grad`` is (m, d) and ``hess`` (m, d, d); returns (m, d-1) sorted curvatures.
    """
    g = np.atleast_2d(grad)
    gn = np.linalg.norm(g, axis=1)
    # critical points of phi give NaN rows, which callers treat as undefined
    with np.errstate(divide="ignore", invalid="ignore"):
        T = tangent_basis(g / gn[:, None])
        S = np.einsum("mia,mij,mjb->mab", T, hess, T) / gn[:, None, None]
    S = 0.5 * (S + np.transpose(S, (0, 2, 1)))
    return np.linalg.eigvalsh(S)


@dataclass(frozen=True)
class CurvatureSample:
    point: tuple
    outward_normal: tuple
    kappas: SymVector
    H: float


@dataclass
class BoundarySamples:
    """Quasi-uniform boundary sample with surface-measure weights."""

    points: np.ndarray
    normals: np.ndarray
    kappas: np.ndarray
    weights: np.ndarray
    component: np.ndarray
    spacing: float
    skipped: list = field(default_factory=list)

    @property
    def H(self):
        return self.kappas.sum(axis=1)

    def __len__(self):
        return len(self.points)

    def __getitem__(self, i):
        return CurvatureSample(point=tuple(self.points[i]),
                               outward_normal=tuple(self.normals[i]),
                               kappas=SymVector(tuple(self.kappas[i])),
                               H=float(self.kappas[i].sum()))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]


@dataclass(frozen=True)
class ConvexityReport:
    H0: float
    kappa0: float
    weakly_mean_convex: bool
    witness_point: tuple
    H_min_sampled: float
    margin: float
    tol: float


class Domain:
    """Base class; subclasses fill in the geometry."""

    kind = "abstract"
    analytic = True
    truncated = False
    n_components = 1
    rotation_invariant = False

    def __init__(self, dim, lo, hi, params):
        if dim < 2:
            raise DomainError("ambient dimension must be at least 2")
        self.dim = int(dim)
        self.bounding_box = (np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
        self.params = dict(params)

    @property
    def n(self):
        return self.dim - 1

    def describe(self):
        out = {"kind": self.kind, "dim": self.dim}
        for k, v in self.params.items():
            out[k] = list(v) if isinstance(v, (tuple, list, np.ndarray)) else v
        return out

    # geometry interface -------------------------------------------------
    def inside(self, X):
        raise NotImplementedError

    def project(self, X):
        """Nearest boundary points and their component ids."""
        raise NotImplementedError

    def normals(self, Z, comp):
        raise NotImplementedError

    def kappas(self, Z, comp):
        raise NotImplementedError

    def distance(self, X):
        X = np.atleast_2d(X)
        Z, _ = self.project(X)
        return np.linalg.norm(X - Z, axis=1)

    def geometry(self, X):
        """Return (delta, Z, comp, outward normals at Z, kappas at Z)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Z, comp = self.project(X)
        delta = np.linalg.norm(X - Z, axis=1)
        return delta, Z, comp, self.normals(Z, comp), self.kappas(Z, comp)

    def truncation_gap(self, X):
        X = np.atleast_2d(X)
        return np.full(len(X), np.inf)

    def sample(self, resolution):
        raise NotImplementedError

    def diameter(self):
        return None

    def volume(self):
        return None

    def interior_radius(self):
        return None

    def feature_size(self):
        raise NotImplementedError

    def scaled(self, t):
        raise NotImplementedError

    @property
    def axisymmetric(self):
        """True for 3D domains invariant under rotation about the last axis."""
        return self.dim == 3 and self.rotation_invariant


def _check_positive(**kw):
    for k, v in kw.items():
        if not np.all(np.asarray(v, dtype=float) > 0):
            raise DomainError(f"parameter {k} must be positive, got {v}")


def _fib_sphere(m):
    i = np.arange(m) + 0.5
    z = 1.0 - 2.0 * i / m
    phi = pi * (3.0 - np.sqrt(5.0)) * i
    s = np.sqrt(1.0 - z * z)
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)


def _sphere_points(dim, m):
    if dim == 2:
        t = 2 * pi * np.arange(m) / m
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    if dim == 3:
        return _fib_sphere(m)
    from scipy.stats import norm, qmc
    u = qmc.Sobol(dim, scramble=True, seed=0).random_base2(int(np.ceil(np.log2(max(m, 2)))))
    g = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _radial_unit(X):
    r = np.linalg.norm(X, axis=1)
    U = np.zeros_like(X)
    ok = r > 0
    U[ok] = X[ok] / r[ok, None]
    U[~ok, 0] = 1.0
    return U, r


class Ball(Domain):
    kind = "ball"
    rotation_invariant = True

    def __init__(self, R=1.0, dim=2):
        _check_positive(R=R)
        self.R = float(R)
        super().__init__(dim, [-R] * dim, [R] * dim, {"R": self.R})

    def inside(self, X):
        return np.linalg.norm(np.atleast_2d(X), axis=1) < self.R

    def project(self, X):
        U, _ = _radial_unit(np.atleast_2d(X))
        return self.R * U, np.zeros(len(U), dtype=int)

    def distance(self, X):
        return np.abs(self.R - np.linalg.norm(np.atleast_2d(X), axis=1))

    def normals(self, Z, comp):
        return _radial_unit(Z)[0]

    def kappas(self, Z, comp):
        return np.full((len(Z), self.n), 1.0 / self.R)

    def sample(self, resolution):
        U = _sphere_points(self.dim, int(resolution))
        m = len(U)
        w = np.full(m, sphere_area(self.n) * self.R ** self.n / m)
        spacing = self.R * (2 * pi / m if self.dim == 2 else np.sqrt(4 * pi / m) * 1.5)
        return BoundarySamples(self.R * U, U, self.kappas(U, None), w,
                               np.zeros(m, dtype=int), float(spacing))

    def diameter(self):
        return 2 * self.R

    def volume(self):
        return ball_volume(self.dim, self.R)

    def interior_radius(self):
        return self.R

    def feature_size(self):
        return 2 * self.R

    def scaled(self, t):
        return Ball(self.R * t, self.dim)


class Torus(Domain):
    """Solid ring torus in R^3 with minor radius r and major radius R."""

    kind = "torus"
    rotation_invariant = True

    def __init__(self, r=1.0, R=2.0):
        _check_positive(r=r, R=R)
        if not r < R:
            raise DomainError("torus needs r < R")
        self.r, self.R = float(r), float(R)
        a = R + r
        super().__init__(3, [-a, -a, -r], [a, a, r], {"r": self.r, "R": self.R})

    def _tube(self, X):
        X = np.atleast_2d(X)
        rho = np.hypot(X[:, 0], X[:, 1])
        phi = np.arctan2(X[:, 1], X[:, 0])
        q0, q1 = rho - self.R, X[:, 2]
        d = np.hypot(q0, q1)
        theta = np.where(d > 0, np.arctan2(q1, q0), 0.0)
        return phi, theta, d

    def inside(self, X):
        return self._tube(X)[2] < self.r

    def point(self, theta, phi):
        w = self.R + self.r * np.cos(theta)
        return np.stack([w * np.cos(phi), w * np.sin(phi), self.r * np.sin(theta)], axis=-1)

    def project(self, X):
        phi, theta, _ = self._tube(X)
        return self.point(theta, phi), np.zeros(len(phi), dtype=int)

    def distance(self, X):
        return np.abs(self.r - self._tube(X)[2])

    def _angles(self, Z):
        phi = np.arctan2(Z[:, 1], Z[:, 0])
        rho = np.hypot(Z[:, 0], Z[:, 1])
        theta = np.arctan2(Z[:, 2], rho - self.R)
        return theta, phi

    def normals(self, Z, comp):
        theta, phi = self._angles(Z)
        return np.stack([np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi),
                         np.sin(theta)], axis=1)

    def kappas_theta(self, theta):
        c = np.cos(theta)
        return np.stack([np.full_like(c, 1.0 / self.r), c / (self.R + self.r * c)], axis=-1)

    def kappas(self, Z, comp):
        return self.kappas_theta(self._angles(Z)[0])

    def sample(self, resolution):
        nt = int(resolution) + int(resolution) % 2
        nphi = max(8, int(round(nt * (self.R + self.r) / self.r)))
        theta = 2 * pi * np.arange(nt) / nt
        phi = 2 * pi * (np.arange(nphi) + 0.5) / nphi
        T, P = np.meshgrid(theta, phi, indexing="ij")
        T, P = T.ravel(), P.ravel()
        Z = self.point(T, P)
        w = self.r * (self.R + self.r * np.cos(T)) * (2 * pi / nt) * (2 * pi / nphi)
        spacing = max(self.r * 2 * pi / nt, (self.R + self.r) * 2 * pi / nphi)
        return BoundarySamples(Z, self.normals(Z, None), self.kappas_theta(T), w,
                               np.zeros(len(Z), dtype=int), float(spacing))

    def diameter(self):
        return 2 * (self.R + self.r)

    def volume(self):
        return 2 * pi ** 2 * self.R * self.r ** 2

    def interior_radius(self):
        return self.r

    def feature_size(self):
        return min(2 * self.r, 2 * (self.R - self.r))

    def scaled(self, t):
        return Torus(self.r * t, self.R * t)


class Annulus(Domain):
    """Spherical shell r_in < |x| < r_out (an annulus when dim = 2)."""

    kind = "annulus"
    rotation_invariant = True
    n_components = 2

    def __init__(self, r_in=0.5, r_out=1.0, dim=2):
        _check_positive(r_in=r_in, r_out=r_out)
        if not r_in < r_out:
            raise DomainError("annulus needs r_in < r_out")
        self.r_in, self.r_out = float(r_in), float(r_out)
        super().__init__(dim, [-r_out] * dim, [r_out] * dim,
                         {"r_in": self.r_in, "r_out": self.r_out})

    def inside(self, X):
        r = np.linalg.norm(np.atleast_2d(X), axis=1)
        return (r > self.r_in) & (r < self.r_out)

    def project(self, X):
        U, r = _radial_unit(np.atleast_2d(X))
        outer = (self.r_out - r) < (r - self.r_in)
        rad = np.where(outer, self.r_out, self.r_in)
        return rad[:, None] * U, outer.astype(int)

    def distance(self, X):
        r = np.linalg.norm(np.atleast_2d(X), axis=1)
        return np.minimum(np.abs(r - self.r_in), np.abs(self.r_out - r))

    def normals(self, Z, comp):
        U = _radial_unit(Z)[0]
        return np.where((np.asarray(comp) == 1)[:, None], U, -U)

    def kappas(self, Z, comp):
        k = np.where(np.asarray(comp) == 1, 1.0 / self.r_out, -1.0 / self.r_in)
        return np.repeat(k[:, None], self.n, axis=1)

    def sample(self, resolution):
        m_out = int(resolution)
        m_in = max(8, int(round(m_out * (self.r_in / self.r_out) ** self.n)))
        pts, comp, w = [], [], []
        for c, rad, m in ((0, self.r_in, m_in), (1, self.r_out, m_out)):
            U = _sphere_points(self.dim, m)
            pts.append(rad * U)
            comp.append(np.full(len(U), c))
            w.append(np.full(len(U), sphere_area(self.n) * rad ** self.n / len(U)))
        Z, comp = np.concatenate(pts), np.concatenate(comp)
        per = 2 * pi / m_out if self.dim == 2 else 1.5 * np.sqrt(4 * pi / m_out)
        spacing = self.r_out * per
        return BoundarySamples(Z, self.normals(Z, comp), self.kappas(Z, comp),
                               np.concatenate(w), comp, float(spacing))

    def diameter(self):
        return 2 * self.r_out

    def volume(self):
        return ball_volume(self.dim, self.r_out) - ball_volume(self.dim, self.r_in)

    def interior_radius(self):
        return 0.5 * (self.r_out - self.r_in)

    def feature_size(self):
        return min(self.r_out - self.r_in, 2 * self.r_in)

    def scaled(self, t):
        return Annulus(self.r_in * t, self.r_out * t, self.dim)


_AXES = "xyzw"


def parse_faces(spec, dim):
    """Parse a face list such as 'x-, y+' into (axis, side) pairs."""
    out = []
    if not spec:
        return tuple(out)
    items = spec if isinstance(spec, (list, tuple)) else str(spec).replace(",", " ").split()
    for item in items:
        if isinstance(item, tuple):
            out.append(item)
            continue
        item = item.strip()
        if len(item) != 2 or item[0] not in _AXES[:dim] or item[1] not in "+-":
            raise ConfigurationError(f"bad face name {item!r}; use e.g. 'x-' or 'z+'")
        out.append((_AXES.index(item[0]), 1 if item[1] == "+" else 0))
    return tuple(sorted(set(out)))


class Box(Domain):
    """Axis-aligned box [0, L_1] x ... x [0, L_d].

    Faces listed in ``open_faces`` are artificial truncation faces rather
    than boundary, which turns the box into a slab or half-space piece.
    """

    kind = "box"

    def __init__(self, sides=(1.0, 1.0), open_faces=()):
        sides = tuple(float(s) for s in sides)
        _check_positive(sides=sides)
        self.sides = np.array(sides)
        self.open_faces = parse_faces(open_faces, len(sides))
        self.truncated = bool(self.open_faces)
        faces = [(a, s) for a in range(len(sides)) for s in (0, 1)]
        self.closed_faces = [f for f in faces if f not in self.open_faces]
        if not self.closed_faces:
            raise DomainError("box needs at least one closed face")
        params = {"sides": sides}
        if self.open_faces:
            params["open_faces"] = " ".join(_AXES[a] + "-+"[s] for a, s in self.open_faces)
        super().__init__(len(sides), np.zeros(len(sides)), self.sides, params)

    def _gaps(self, X, faces):
        X = np.atleast_2d(X)
        cols = [X[:, a] if s == 0 else self.sides[a] - X[:, a] for a, s in faces]
        return np.stack(cols, axis=1)

    def inside(self, X):
        X = np.atleast_2d(X)
        return np.all((X > 0) & (X < self.sides), axis=1)

    def project(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        g = self._gaps(X, self.closed_faces)
        j = np.argmin(np.abs(g), axis=1)
        Z = X.copy()
        for k, (a, s) in enumerate(self.closed_faces):
            sel = j == k
            Z[sel, a] = 0.0 if s == 0 else self.sides[a]
        return Z, np.zeros(len(X), dtype=int)

    def distance(self, X):
        return np.min(np.abs(self._gaps(X, self.closed_faces)), axis=1)

    def _face_of(self, Z):
        g = np.abs(self._gaps(Z, self.closed_faces))
        return np.argmin(g, axis=1)

    def normals(self, Z, comp):
        Z = np.atleast_2d(Z)
        j = self._face_of(Z)
        Nrm = np.zeros_like(Z)
        for k, (a, s) in enumerate(self.closed_faces):
            Nrm[j == k, a] = -1.0 if s == 0 else 1.0
        return Nrm

    def kappas(self, Z, comp):
        return np.zeros((len(np.atleast_2d(Z)), self.n))

    def truncation_gap(self, X):
        if not self.open_faces:
            return super().truncation_gap(X)
        return np.min(self._gaps(X, self.open_faces), axis=1)

    def sample(self, resolution):
        Lmax = self.sides.max()
        pts, nrm, w = [], [], []
        spacing = 0.0
        for a, s in self.closed_faces:
            tang = [b for b in range(self.dim) if b != a]
            counts = [max(2, int(round(resolution * self.sides[b] / Lmax))) for b in tang]
            axes = [(np.arange(c) + 0.5) / c * self.sides[b] for b, c in zip(tang, counts)]
            grids = np.meshgrid(*axes, indexing="ij")
            P = np.zeros((grids[0].size, self.dim))
            for b, g in zip(tang, grids):
                P[:, b] = g.ravel()
            P[:, a] = 0.0 if s == 0 else self.sides[a]
            nv = np.zeros(self.dim)
            nv[a] = -1.0 if s == 0 else 1.0
            cell = np.prod([self.sides[b] / c for b, c in zip(tang, counts)])
            pts.append(P)
            nrm.append(np.repeat(nv[None], len(P), axis=0))
            w.append(np.full(len(P), cell))
            spacing = max(spacing, max(self.sides[b] / c for b, c in zip(tang, counts)))
        Z = np.concatenate(pts)
        return BoundarySamples(Z, np.concatenate(nrm), np.zeros((len(Z), self.n)),
                               np.concatenate(w), np.zeros(len(Z), dtype=int), float(spacing))

    def diameter(self):
        return float(np.linalg.norm(self.sides))

    def volume(self):
        return float(np.prod(self.sides))

    def interior_radius(self):
        if self.truncated:
            return None
        return float(self.sides.min() / 2)

    def feature_size(self):
        closed_axes = {a for a, _ in self.closed_faces}
        return float(min(self.sides[a] for a in closed_axes))

    def scaled(self, t):
        return Box(tuple(self.sides * t), self.open_faces)


def _cubic_real_roots(p, q):
    """Real roots of s^3 + p s + q = 0, as an (m, 3) array padded with NaN."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    out = np.full(p.shape + (3,), np.nan)
    disc = (q / 2) ** 2 + (p / 3) ** 3
    one = disc > 0
    sq = np.sqrt(np.where(one, disc, 0.0))
    out[..., 0] = np.where(one, np.cbrt(-q / 2 + sq) + np.cbrt(-q / 2 - sq), np.nan)
    three = ~one
    with np.errstate(invalid="ignore", divide="ignore"):
        mpp = np.sqrt(np.where(three, -p / 3, 0.0))
        arg = np.where(three & (mpp > 0), -q / (2 * np.where(mpp > 0, mpp, 1.0) ** 3), 0.0)
        ang = np.arccos(np.clip(arg, -1.0, 1.0)) / 3
    for k in range(3):
        root = 2 * mpp * np.cos(ang - 2 * pi * k / 3)
        out[..., k] = np.where(three, root, out[..., k])
    return out


class ParaboloidCap(Domain):
    """Region above the paraboloid x_d = |x'|^2, truncated at x_d = height."""

    kind = "paraboloid_cap"
    rotation_invariant = True
    truncated = True

    def __init__(self, height=1.0, dim=3):
        _check_positive(height=height)
        self.height = float(height)
        a = np.sqrt(self.height)
        super().__init__(dim, [-a] * (dim - 1) + [0.0], [a] * (dim - 1) + [self.height],
                         {"height": self.height})

    def inside(self, X):
        X = np.atleast_2d(X)
        r2 = np.sum(X[:, :-1] ** 2, axis=1)
        return (X[:, -1] > r2) & (X[:, -1] < self.height)

    def _radial(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        U, rho = _radial_unit(X[:, :-1])
        return U, rho, X[:, -1]

    def project(self, X):
        U, rho, z = self._radial(X)
        roots = _cubic_real_roots((1 - 2 * z) / 2, -rho / 2)
        roots = np.where(roots >= -1e-12, np.maximum(roots, 0.0), np.nan)
        cost = (roots - rho[:, None]) ** 2 + (roots ** 2 - z[:, None]) ** 2
        cost = np.where(np.isnan(cost), np.inf, cost)
        s = roots[np.arange(len(rho)), np.argmin(cost, axis=1)]
        s = np.where(np.isfinite(s), s, 0.0)
        for _ in range(3):
            g = 2 * s ** 3 + (1 - 2 * z) * s - rho
            dg = 6 * s ** 2 + (1 - 2 * z)
            step = np.where(np.abs(dg) > 1e-12, g / np.where(dg == 0, 1, dg), 0.0)
            s = np.where(np.abs(step) < 1e-3 * (1 + s), s - step, s)
        s = np.maximum(s, 0.0)
        Z = np.concatenate([s[:, None] * U, (s * s)[:, None]], axis=1)
        return Z, np.zeros(len(s), dtype=int)

    def _s_of(self, Z):
        return np.linalg.norm(np.atleast_2d(Z)[:, :-1], axis=1)

    def normals(self, Z, comp):
        Z = np.atleast_2d(Z)
        U, s = _radial_unit(Z[:, :-1])
        v = np.concatenate([2 * s[:, None] * U, -np.ones((len(s), 1))], axis=1)
        return v / np.sqrt(1 + 4 * s * s)[:, None]

    def kappas_s(self, s):
        g = 1 + 4 * s * s
        km = 2 / g ** 1.5
        kp = 2 / np.sqrt(g)
        cols = [km] + [kp] * (self.dim - 2)
        return np.stack(cols, axis=-1)

    def kappas(self, Z, comp):
        return self.kappas_s(self._s_of(Z))

    def truncation_gap(self, X):
        return self.height - np.atleast_2d(X)[:, -1]

    def sample(self, resolution):
        smax = np.sqrt(self.height)
        fine = np.linspace(0, smax, 20001)
        arc = 0.5 * fine * np.sqrt(1 + 4 * fine ** 2) + 0.25 * np.arcsinh(2 * fine)
        m = int(resolution)
        da = arc[-1] / m
        s = np.interp((np.arange(m) + 0.5) * da, arc, fine)
        if self.dim == 2:
            s = np.concatenate([-s[::-1], s])
            Z = np.stack([s, s * s], axis=1)
            w = np.full(len(s), da)
        else:
            pts, w = [], []
            for sj in s:
                nphi = max(8, int(round(2 * pi * sj / da)))
                phi = 2 * pi * (np.arange(nphi) + 0.5) / nphi
                if self.dim == 3:
                    U = np.stack([np.cos(phi), np.sin(phi)], axis=1)
                else:
                    U = _sphere_points(self.dim - 1, nphi)
                pts.append(np.concatenate([sj * U, np.full((len(U), 1), sj * sj)], axis=1))
                ring = sphere_area(self.dim - 2) * sj ** (self.dim - 2) * da
                w.append(np.full(len(U), ring / len(U)))
            Z, w = np.concatenate(pts), np.concatenate(w)
        return BoundarySamples(Z, self.normals(Z, None), self.kappas(Z, None), w,
                               np.zeros(len(Z), dtype=int), float(da))

    def volume(self):
        h = self.height
        if self.dim == 2:
            return 4.0 / 3.0 * h ** 1.5
        return ball_volume(self.dim - 1) * h ** ((self.dim + 1) / 2) / ((self.dim + 1) / 2)

    def feature_size(self):
        return 1.0

    def scaled(self, t):
        raise DomainError("paraboloid_cap is defined for the unit paraboloid only")


class CatenoidSlab(Domain):
    """Inside of the catenoid rho = c cosh(z/c), truncated to |z| < thickness/2."""

    kind = "catenoid_slab"
    rotation_invariant = True
    truncated = True

    def __init__(self, c=1.0, thickness=2.0):
        _check_positive(c=c, thickness=thickness)
        self.c, self.T = float(c), 0.5 * float(thickness)
        rmax = self.c * np.cosh(self.T / self.c)
        super().__init__(3, [-rmax, -rmax, -self.T], [rmax, rmax, self.T],
                         {"c": self.c, "thickness": 2 * self.T})

    def inside(self, X):
        X = np.atleast_2d(X)
        rho = np.hypot(X[:, 0], X[:, 1])
        return (rho < self.c * np.cosh(X[:, 2] / self.c)) & (np.abs(X[:, 2]) < self.T)

    def _meridian_s(self, rho, z):
        c = self.c
        U = np.abs(c * np.cosh(z / c) - rho) + 1e-12
        k = 17
        grid = z[:, None] + U[:, None] * np.linspace(-1, 1, k)[None, :]
        cost = (c * np.cosh(grid / c) - rho[:, None]) ** 2 + (grid - z[:, None]) ** 2
        j = np.argmin(cost, axis=1)
        step = 2 * U / (k - 1)
        lo = np.take_along_axis(grid, j[:, None], 1)[:, 0] - step
        hi = lo + 2 * step
        gr = (np.sqrt(5) - 1) / 2

        def g(s):
            return (c * np.cosh(s / c) - rho) ** 2 + (s - z) ** 2
        a, b = lo, hi
        x1, x2 = b - gr * (b - a), a + gr * (b - a)
        f1, f2 = g(x1), g(x2)
        for _ in range(60):
            left = f1 < f2
            b = np.where(left, x2, b)
            a = np.where(left, a, x1)
            nx1 = np.where(left, b - gr * (b - a), x2)
            nx2 = np.where(left, x1, a + gr * (b - a))
            nf1 = np.where(left, g(nx1), f2)
            nf2 = np.where(left, f1, g(nx2))
            x1, x2, f1, f2 = nx1, nx2, nf1, nf2
        s = 0.5 * (a + b)
        for _ in range(2):
            sh, ch = np.sinh(s / c), np.cosh(s / c)
            d1 = (c * ch - rho) * sh + (s - z)
            d2 = sh * sh + (c * ch - rho) * ch / c + 1
            ok = d2 > 1e-12
            s = np.where(ok, s - d1 / np.where(ok, d2, 1.0), s)
        return s

    def project(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        rho = np.hypot(X[:, 0], X[:, 1])
        phi = np.arctan2(X[:, 1], X[:, 0])
        s = self._meridian_s(rho, X[:, 2])
        R = self.c * np.cosh(s / self.c)
        Z = np.stack([R * np.cos(phi), R * np.sin(phi), s], axis=1)
        return Z, np.zeros(len(X), dtype=int)

    def normals(self, Z, comp):
        Z = np.atleast_2d(Z)
        phi = np.arctan2(Z[:, 1], Z[:, 0])
        ch = np.cosh(Z[:, 2] / self.c)
        sh = np.sinh(Z[:, 2] / self.c)
        return np.stack([np.cos(phi) / ch, np.sin(phi) / ch, -sh / ch], axis=1)

    def kappa_s(self, s):
        """Magnitude of the two opposite principal curvatures at height s."""
        return 1.0 / (self.c * np.cosh(s / self.c) ** 2)

    def kappas(self, Z, comp):
        k = self.kappa_s(np.atleast_2d(Z)[:, 2])
        return np.stack([-k, k], axis=1)

    def truncation_gap(self, X):
        return self.T - np.abs(np.atleast_2d(X)[:, 2])

    def sample(self, resolution):
        c, m = self.c, int(resolution)
        A = 2 * c * np.sinh(self.T / c)
        da = A / m
        arc = -c * np.sinh(self.T / c) + (np.arange(m) + 0.5) * da
        s = c * np.arcsinh(arc / c)
        pts, w = [], []
        for sj in s:
            R = c * np.cosh(sj / c)
            nphi = max(8, int(round(2 * pi * R / da)))
            phi = 2 * pi * (np.arange(nphi) + 0.5) / nphi
            pts.append(np.stack([R * np.cos(phi), R * np.sin(phi), np.full(nphi, sj)], axis=1))
            w.append(np.full(nphi, 2 * pi * R * da / nphi))
        Z = np.concatenate(pts)
        return BoundarySamples(Z, self.normals(Z, None), self.kappas(Z, None),
                               np.concatenate(w), np.zeros(len(Z), dtype=int), float(da))

    def volume(self):
        c, T = self.c, self.T
        return pi * c * c * (T + 0.5 * c * np.sinh(2 * T / c))

    def feature_size(self):
        return 2 * self.c

    def scaled(self, t):
        return CatenoidSlab(self.c * t, 2 * self.T * t)


def ellipsoid_project(Y, axes, iters=100):
    """Nearest points on the ellipsoid sum (x_i/a_i)^2 = 1 to the rows of Y.

    Works for points inside and outside. The root of
    F(t) = sum (a_i y_i / (t + a_i^2))^2 - 1 on t > -a_min^2 is bracketed and
    bisected; the branch where the smallest-axis coordinate vanishes is
    handled in closed form.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    a = np.asarray(axes, dtype=float)
    order = np.argsort(-a, kind="stable")
    a = a[order]
    sgn = np.where(Y[:, order] < 0, -1.0, 1.0)
    y = np.abs(Y[:, order])
    a2 = a * a
    an2, an = a2[-1], a[-1]
    yn = y[:, -1]
    X = np.empty_like(y)

    degenerate = yn <= 1e-300
    closed = np.zeros(len(y), dtype=bool)
    if np.any(degenerate):
        with np.errstate(divide="ignore", invalid="ignore"):
            den = a2[:-1] - an2
            xi = np.where(den > 0, a2[:-1] * y[:, :-1] / np.where(den > 0, den, 1.0), np.inf)
            xi = np.where(y[:, :-1] == 0, 0.0, xi)
            rest = 1.0 - np.sum((xi / a[:-1]) ** 2, axis=1)
        closed = degenerate & np.isfinite(rest) & (rest > 0)
        X[closed, :-1] = xi[closed]
        X[closed, -1] = an * np.sqrt(rest[closed])

    todo = ~closed
    if np.any(todo):
        yy = y[todo]
        lo = -an2 + an * yy[:, -1]
        lo = np.where(yy[:, -1] > 0, lo, -an2 * (1 - 1e-15))
        hi = np.maximum(a[0] * np.linalg.norm(yy, axis=1), lo)
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            F = np.sum((a * yy / (mid[:, None] + a2)) ** 2, axis=1) - 1.0
            pos = F > 0
            lo = np.where(pos, mid, lo)
            hi = np.where(pos, hi, mid)
        t = 0.5 * (lo + hi)
        X[todo] = a2 * yy / (t[:, None] + a2)
    out = np.empty_like(X)
    out[:, order] = X * sgn
    return out


def ellipsoid_curvatures(Z, axes):
    """Principal curvatures of the ellipsoid at surface points, outward normal."""
    Z = np.atleast_2d(Z)
    a2 = np.asarray(axes, dtype=float) ** 2
    grad = 2 * Z / a2
    hess = np.broadcast_to(np.diag(2.0 / a2), (len(Z),) + (len(a2), len(a2)))
    return shape_operator_curvatures(grad, hess)


def _ellipsoid_samples(axes, m):
    a = np.asarray(axes, dtype=float)
    if len(a) == 2:
        t = 2 * pi * (np.arange(m) + 0.5) / m
        Z = np.stack([a[0] * np.cos(t), a[1] * np.sin(t)], axis=1)
        w = np.hypot(a[0] * np.sin(t), a[1] * np.cos(t)) * 2 * pi / m
        return Z, w
    nt = max(4, m // 2)
    th = pi * (np.arange(nt) + 0.5) / nt
    ph = 2 * pi * (np.arange(m) + 0.5) / m
    T, P = np.meshgrid(th, ph, indexing="ij")
    T, P = T.ravel(), P.ravel()
    st, ct, sp, cp = np.sin(T), np.cos(T), np.sin(P), np.cos(P)
    Z = np.stack([a[0] * st * cp, a[1] * st * sp, a[2] * ct], axis=1)
    dT = np.stack([a[0] * ct * cp, a[1] * ct * sp, -a[2] * st], axis=1)
    dP = np.stack([-a[0] * st * sp, a[1] * st * cp, np.zeros_like(T)], axis=1)
    w = np.linalg.norm(np.cross(dT, dP), axis=1) * (pi / nt) * (2 * pi / m)
    return Z, w


class EllipsoidShell(Domain):
    """Region between two concentric axis-aligned ellipsoids."""

    kind = "ellipsoid_shell"
    n_components = 2

    def __init__(self, outer=(2.0, 1.5, 1.0), inner=(1.0, 0.5, 0.5)):
        outer = tuple(float(v) for v in outer)
        inner = tuple(float(v) for v in inner)
        if len(outer) != len(inner) or len(outer) not in (2, 3):
            raise DomainError("ellipsoid_shell needs two axis triples (or pairs) of equal length")
        _check_positive(outer=outer, inner=inner)
        if not all(b < a for a, b in zip(outer, inner)):
            raise DomainError("inner ellipsoid must lie strictly inside the outer one")
        self.outer, self.inner = np.array(outer), np.array(inner)
        super().__init__(len(outer), -self.outer, self.outer, {"outer": outer, "inner": inner})

    def _levels(self, X):
        X = np.atleast_2d(X)
        return (np.sum((X / self.outer) ** 2, axis=1), np.sum((X / self.inner) ** 2, axis=1))

    def inside(self, X):
        fo, fi = self._levels(X)
        return (fo < 1) & (fi > 1)

    def project(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Zo = ellipsoid_project(X, self.outer)
        Zi = ellipsoid_project(X, self.inner)
        do = np.linalg.norm(X - Zo, axis=1)
        di = np.linalg.norm(X - Zi, axis=1)
        outer = do < di
        return np.where(outer[:, None], Zo, Zi), outer.astype(int)

    def normals(self, Z, comp):
        Z = np.atleast_2d(Z)
        comp = np.asarray(comp)
        g = np.where((comp == 1)[:, None], Z / self.outer ** 2, -Z / self.inner ** 2)
        return g / np.linalg.norm(g, axis=1, keepdims=True)

    def kappas(self, Z, comp):
        Z = np.atleast_2d(Z)
        comp = np.asarray(comp)
        out = np.empty((len(Z), self.n))
        o = comp == 1
        if np.any(o):
            out[o] = ellipsoid_curvatures(Z[o], self.outer)
        if np.any(~o):
            out[~o] = -ellipsoid_curvatures(Z[~o], self.inner)[:, ::-1]
        return out

    def sample(self, resolution):
        m = int(resolution)
        ratio = self.inner.max() / self.outer.max()
        mi = max(8, int(round(m * ratio)))
        Zo, wo = _ellipsoid_samples(self.outer, m)
        Zi, wi = _ellipsoid_samples(self.inner, mi)
        Z = np.concatenate([Zi, Zo])
        comp = np.concatenate([np.zeros(len(Zi), dtype=int), np.ones(len(Zo), dtype=int)])
        spacing = 2 * pi * self.outer.max() / m
        return BoundarySamples(Z, self.normals(Z, comp), self.kappas(Z, comp),
                               np.concatenate([wi, wo]), comp, float(spacing))

    def diameter(self):
        return 2 * float(self.outer.max())

    def volume(self):
        return ball_volume(self.dim) * float(np.prod(self.outer) - np.prod(self.inner))

    def feature_size(self):
        return float(min(np.min(self.outer - self.inner), 2 * self.inner.min()))

    def scaled(self, t):
        return EllipsoidShell(tuple(self.outer * t), tuple(self.inner * t))


class Implicit(Domain):
    """Domain {phi < 0} for a level-set expression, inside a given box.

    Normals and curvatures come from central finite differences of phi;
    distances are not exact and are supplied by the grid solver.
    """

    kind = "implicit"
    analytic = False

    def __init__(self, expr, lo, hi, feature=None, scale=1.0):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise DomainError("implicit domain needs a bounding box with lo < hi")
        self.phi = LevelSet(expr, len(lo))
        self.expr = expr
        self.scale = float(scale)
        self._feature = feature
        params = {"expr": expr, "lo": tuple(lo), "hi": tuple(hi)}
        if feature is not None:
            params["feature"] = float(feature)
        if scale != 1.0:
            params["scale"] = self.scale
        super().__init__(len(lo), lo, hi, params)
        self.eps = 1e-4 * float(np.max(hi - lo))

    def level(self, X):
        return self.phi(np.atleast_2d(X) / self.scale)

    def inside(self, X):
        X = np.atleast_2d(X)
        lo, hi = self.bounding_box
        return (self.level(X) < 0) & np.all((X >= lo) & (X <= hi), axis=1)

    def grad(self, X, eps=None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        e = self.eps if eps is None else eps
        G = np.empty_like(X)
        for i in range(self.dim):
            d = np.zeros(self.dim)
            d[i] = e
            G[:, i] = (self.level(X + d) - self.level(X - d)) / (2 * e)
        return G

    def hess(self, X, eps=None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        e = 10 * self.eps if eps is None else eps
        Hm = np.empty((len(X), self.dim, self.dim))
        f0 = self.level(X)
        for i in range(self.dim):
            di = np.zeros(self.dim)
            di[i] = e
            Hm[:, i, i] = (self.level(X + di) - 2 * f0 + self.level(X - di)) / e ** 2
            for j in range(i + 1, self.dim):
                dj = np.zeros(self.dim)
                dj[j] = e
                v = (self.level(X + di + dj) - self.level(X + di - dj)
                     - self.level(X - di + dj) + self.level(X - di - dj)) / (4 * e * e)
                Hm[:, i, j] = Hm[:, j, i] = v
        return Hm

    def newton_project(self, X, iters=30):
        Z = np.atleast_2d(np.asarray(X, dtype=float)).copy()
        for _ in range(iters):
            f = self.level(Z)
            g = self.grad(Z)
            g2 = np.sum(g * g, axis=1)
            ok = g2 > 1e-24
            Z[ok] -= (f[ok] / g2[ok])[:, None] * g[ok]
        return Z

    def project(self, X):
        Z = self.newton_project(X)
        return Z, np.zeros(len(Z), dtype=int)

    def normals(self, Z, comp):
        g = self.grad(Z)
        with np.errstate(divide="ignore", invalid="ignore"):
            return g / np.linalg.norm(g, axis=1, keepdims=True)

    def kappas(self, Z, comp):
        return shape_operator_curvatures(self.grad(Z), self.hess(Z))

    def sample(self, resolution):
        lo, hi = self.bounding_box
        h = float(np.max(hi - lo)) / int(resolution)
        counts = np.maximum(2, np.round((hi - lo) / h).astype(int) + 1)
        axes = [lo[i] + h * np.arange(counts[i]) for i in range(self.dim)]
        G = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        F = self.level(G.reshape(-1, self.dim)).reshape(G.shape[:-1])
        pts, axis_of = [], []
        for k in range(self.dim):
            a = [slice(None)] * self.dim
            b = [slice(None)] * self.dim
            a[k], b[k] = slice(0, -1), slice(1, None)
            fa, fb = F[tuple(a)], F[tuple(b)]
            cross = (fa < 0) != (fb < 0)
            if not np.any(cross):
                continue
            t = fa[cross] / (fa[cross] - fb[cross])
            P = G[tuple(a)][cross].copy()
            P[:, k] += t * h
            pts.append(P)
            axis_of.append(np.full(len(P), k))
        if not pts:
            raise DomainError("implicit level set has no zero crossing inside its box")
        Z = self.newton_project(np.concatenate(pts))
        axis_of = np.concatenate(axis_of)
        g = self.grad(Z)
        gn = np.linalg.norm(g, axis=1)
        skipped = []
        ok = np.isfinite(gn) & (gn > 1e-10) & np.all(np.isfinite(Z), axis=1)
        ok &= np.abs(self.level(Z)) < 1e-8 * (1 + gn)
        Nrm = np.zeros_like(Z)
        Nrm[ok] = g[ok] / gn[ok, None]
        # each crossing stands for the patch whose projection along its axis is one cell face
        dom = np.argmax(np.abs(Nrm), axis=1)
        keep = ok & (dom == axis_of)
        K = np.full((len(Z), self.n), np.nan)
        if np.any(keep):
            K1 = shape_operator_curvatures(g[keep], self.hess(Z[keep]))
            K2 = shape_operator_curvatures(g[keep], self.hess(Z[keep], eps=20 * self.eps))
            smooth = np.all(np.abs(K1 - K2) <= 1e-3 * (1 + np.abs(K1)), axis=1)
            idx = np.flatnonzero(keep)
            K[idx] = K1
            for i in idx[~smooth]:
                skipped.append((tuple(Z[i]), "level set not twice differentiable here"))
            keep[idx[~smooth]] = False
        for i in np.flatnonzero(~ok):
            skipped.append((tuple(Z[i]), "gradient vanishes or projection failed"))
        w = h ** (self.dim - 1) / np.maximum(np.abs(Nrm[np.arange(len(Z)), axis_of]), 1e-12)
        return BoundarySamples(Z[keep], Nrm[keep], K[keep], w[keep],
                               np.zeros(int(keep.sum()), dtype=int), float(h * np.sqrt(self.dim)),
                               skipped)

    def diameter(self):
        from scipy.spatial import ConvexHull
        Z = self.sample(64).points
        try:
            V = Z[ConvexHull(Z).vertices]
        except Exception:
            V = Z
        D = np.linalg.norm(V[:, None, :] - V[None, :, :], axis=-1)
        return float(D.max())

    def feature_size(self):
        if self._feature is not None:
            return float(self._feature) * self.scale
        K = self.sample(64).kappas
        kmax = float(np.max(np.abs(K))) if K.size else 0.0
        return 2.0 / kmax if kmax > 0 else float(np.min(self.bounding_box[1] - self.bounding_box[0]))

    def scaled(self, t):
        lo, hi = self.bounding_box
        return Implicit(self.expr, lo * t, hi * t, self._feature, self.scale * t)


def convexity_report(domain, resolution=512, tol=1e-3):
    """Smallest sampled mean curvature, lowered by a local Lipschitz margin.

    The margin is the largest slope of H between the minimising sample and
    its neighbours, times the sample spacing.
    """
    if resolution < 8:
        raise DomainError("resolution must be at least 8")
    S = domain.sample(resolution)
    H = S.H
    i = int(np.argmin(H))
    dist = np.linalg.norm(S.points - S.points[i], axis=1)
    ok = (dist > 0) & (dist <= 2.0 * S.spacing)
    slope = float(np.max(np.abs(H[ok] - H[i]) / dist[ok])) if np.any(ok) else 0.0
    margin = slope * S.spacing
    H0 = float(H[i]) - margin
    kappa0 = float(np.min(np.abs(S.kappas))) if S.kappas.size else 0.0
    return ConvexityReport(H0=H0, kappa0=kappa0, weakly_mean_convex=bool(H0 >= -tol),
                           witness_point=tuple(float(v) for v in S.points[i]),
                           H_min_sampled=float(H[i]), margin=float(margin), tol=float(tol))


def boundary_sample(domain, resolution):
    if resolution < 8:
        raise DomainError("resolution must be at least 8")
    return domain.sample(resolution)


def _floats(v, name):
    if isinstance(v, (list, tuple, np.ndarray)):
        return tuple(float(x) for x in v)
    try:
        return tuple(float(x) for x in str(v).replace(",", " ").split())
    except ValueError:
        raise ConfigurationError(f"{name}: expected a list of numbers, got {v!r}") from None


def make_domain(kind, **p):
    """Build a catalog domain from keyword parameters (numbers or strings)."""
    f = {k: v for k, v in p.items()}

    def num(key, default):
        v = f.get(key, default)
        try:
            return float(v)
        except (TypeError, ValueError):
            raise ConfigurationError(f"{key}: expected a number, got {v!r}") from None

    def integer(key, default):
        v = num(key, default)
        if v != int(v):
            raise ConfigurationError(f"{key}: expected an integer, got {v!r}")
        return int(v)

    if kind == "ball":
        return Ball(num("R", 1.0), integer("dim", 2))
    if kind == "torus":
        return Torus(num("r", 1.0), num("R", 2.0))
    if kind == "annulus":
        return Annulus(num("r_in", 0.5), num("r_out", 1.0), integer("dim", 2))
    if kind == "box":
        return Box(_floats(f.get("sides", "1 1"), "sides"), f.get("open_faces", ""))
    if kind == "paraboloid_cap":
        return ParaboloidCap(num("height", 1.0), integer("dim", 3))
    if kind == "catenoid_slab":
        return CatenoidSlab(num("c", 1.0), num("thickness", 2.0))
    if kind == "ellipsoid_shell":
        return EllipsoidShell(_floats(f.get("outer", "2 1.5 1"), "outer"),
                              _floats(f.get("inner", "1 0.5 0.5"), "inner"))
    if kind == "implicit":
        if "expr" not in f:
            raise ConfigurationError("implicit domain needs 'expr'")
        lo, hi = _floats(f.get("lo", ""), "lo"), _floats(f.get("hi", ""), "hi")
        feat = f.get("feature")
        return Implicit(str(f["expr"]), lo, hi, None if feat is None else num("feature", None))
    raise ConfigurationError(f"unknown domain kind {kind!r}")
