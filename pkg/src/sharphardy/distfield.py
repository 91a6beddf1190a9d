"""Grid distance fields, nearest-point maps, singular set and ridge function.

Grid values live on nodes origin + i*h. The node lattice is padded around
the domain's bounding box and aligned with it, so refining by a factor of
two keeps every coarse node.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import ConfigurationError
from .parallel import chunked_rows

BAND = 3


@dataclass
class Grid:
    origin: np.ndarray
    spacing: float
    dims: tuple
    inside_mask: np.ndarray

    @property
    def ndim(self):
        return len(self.dims)

    @property
    def cell_volume(self):
        return self.spacing ** self.ndim

    def axes(self):
        return [self.origin[i] + self.spacing * np.arange(self.dims[i]) for i in range(self.ndim)]

    def nodes(self):
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def describe(self):
        return {"origin": [float(v) for v in self.origin], "spacing": float(self.spacing),
                "dims": [int(v) for v in self.dims]}


def make_grid(domain, cells=None, spacing=None, pad=2, check=True):
    """Regular grid over the domain's bounding box.

    ``cells`` counts cells across the longest box side; ``spacing`` sets h
    directly. The thinnest feature must span at least 8 cells.
    """
    lo, hi = domain.bounding_box
    if spacing is None:
        if cells is None:
            raise ConfigurationError("grid needs either cells or spacing")
        spacing = float(np.max(hi - lo)) / int(cells)
    h = float(spacing)
    if not h > 0:
        raise ConfigurationError("grid spacing must be positive")
    if check:
        feat = domain.feature_size()
        if feat / h < 8:
            raise ConfigurationError(
                f"grid too coarse: thinnest feature {feat:.4g} spans {feat / h:.2f} cells (< 8)")
    n = np.ceil((hi - lo) / h - 1e-9).astype(int)
    origin = lo - pad * h
    dims = tuple(int(v) + 1 + 2 * pad for v in n)
    g = Grid(origin=origin, spacing=h, dims=dims, inside_mask=np.zeros(dims, dtype=bool))
    X = g.nodes().reshape(-1, g.ndim)
    g.inside_mask = chunked_rows(domain.inside, X).reshape(dims)
    return g


# -- fast sweeping --------------------------------------------------------

@numba.njit(cache=True)
def _godunov2(a0, a1, h):
    if a0 > a1:
        a0, a1 = a1, a0
    u = a0 + h
    if u > a1:
        disc = 2.0 * h * h - (a1 - a0) ** 2
        u = 0.5 * (a0 + a1 + np.sqrt(max(disc, 0.0)))
    return u


@numba.njit(cache=True)
def _godunov3(a0, a1, a2, h):
    if a0 > a1:
        a0, a1 = a1, a0
    if a1 > a2:
        a1, a2 = a2, a1
    if a0 > a1:
        a0, a1 = a1, a0
    u = a0 + h
    if u > a1:
        disc = 2.0 * h * h - (a1 - a0) ** 2
        u = 0.5 * (a0 + a1 + np.sqrt(max(disc, 0.0)))
        if u > a2:
            s = a0 + a1 + a2
            s2 = a0 * a0 + a1 * a1 + a2 * a2
            disc = s * s - 3.0 * (s2 - h * h)
            u = (s + np.sqrt(max(disc, 0.0))) / 3.0
    return u


@numba.njit(cache=True)
def _sweep2(u, free, h, max_rounds, tol):
    nx, ny = u.shape
    a = np.empty(2)
    for _ in range(max_rounds):
        change = 0.0
        for sx in (1, -1):
            for sy in (1, -1):
                for ii in range(nx):
                    i = ii if sx == 1 else nx - 1 - ii
                    for jj in range(ny):
                        j = jj if sy == 1 else ny - 1 - jj
                        if not free[i, j]:
                            continue
                        a[0] = min(u[i - 1, j] if i > 0 else np.inf, u[i + 1, j] if i < nx - 1 else np.inf)
                        a[1] = min(u[i, j - 1] if j > 0 else np.inf, u[i, j + 1] if j < ny - 1 else np.inf)
                        if a[0] == np.inf and a[1] == np.inf:
                            continue
                        v = _godunov2(a[0], a[1], h)
                        if v < u[i, j]:
                            d = u[i, j] - v
                            if u[i, j] == np.inf:
                                change = np.inf
                            elif d > change:
                                change = d
                            u[i, j] = v
        if change <= tol:
            break
    return u


@numba.njit(cache=True)
def _sweep3(u, free, h, max_rounds, tol):
    nx, ny, nz = u.shape
    a = np.empty(3)
    for _ in range(max_rounds):
        change = 0.0
        for sx in (1, -1):
            for sy in (1, -1):
                for sz in (1, -1):
                    for ii in range(nx):
                        i = ii if sx == 1 else nx - 1 - ii
                        for jj in range(ny):
                            j = jj if sy == 1 else ny - 1 - jj
                            for kk in range(nz):
                                k = kk if sz == 1 else nz - 1 - kk
                                if not free[i, j, k]:
                                    continue
                                a[0] = min(u[i - 1, j, k] if i > 0 else np.inf,
                                           u[i + 1, j, k] if i < nx - 1 else np.inf)
                                a[1] = min(u[i, j - 1, k] if j > 0 else np.inf,
                                           u[i, j + 1, k] if j < ny - 1 else np.inf)
                                a[2] = min(u[i, j, k - 1] if k > 0 else np.inf,
                                           u[i, j, k + 1] if k < nz - 1 else np.inf)
                                if a[0] == np.inf and a[1] == np.inf and a[2] == np.inf:
                                    continue
                                v = _godunov3(a[0], a[1], a[2], h)
                                if v < u[i, j, k]:
                                    d = u[i, j, k] - v
                                    if u[i, j, k] == np.inf:
                                        change = np.inf
                                    elif d > change:
                                        change = d
                                    u[i, j, k] = v
        if change <= tol:
            break
    return u


def fast_sweep(seed, free, h, max_rounds=50, tol=1e-13):
    """Solve |grad u| = 1 on ``free`` nodes with fixed values elsewhere."""
    u = np.where(free, np.inf, seed).astype(float)
    if u.ndim == 2:
        return _sweep2(u, free, h, max_rounds, tol)
    if u.ndim == 3:
        return _sweep3(u, free, h, max_rounds, tol)
    raise ConfigurationError("eikonal solver supports 2D and 3D grids")


# -- distance field -------------------------------------------------------

@dataclass
class DistanceField:
    domain: object
    grid: Grid
    delta: np.ndarray
    delta_eikonal: np.ndarray
    eikonal_error: float
    grad_delta: np.ndarray = None
    nearest: np.ndarray = None
    component: np.ndarray = None
    normals: np.ndarray = None
    kappas: np.ndarray = None
    singular_mask: np.ndarray = None
    ridge_Lambda: np.ndarray = None
    h_field: np.ndarray = None
    censored_mask: np.ndarray = None
    flags: list = field(default_factory=list)

    @property
    def inside(self):
        return self.grid.inside_mask

    def points(self):
        return self.grid.nodes()[self.inside]

    def interpolator(self):
        g = self.grid
        vals = np.where(self.inside, self.delta, -self.grid.spacing)
        return RegularGridInterpolator(tuple(g.axes()), vals, bounds_error=False, fill_value=-1.0)


def solve_eikonal(domain, grid):
    """Distance to the boundary on the grid by fast sweeping.

    Nodes within BAND cells of the boundary are seeded with their exact
    point-to-boundary distance (Newton projection for implicit domains). For
    analytic kinds the working field is the exact distance everywhere, and
    the max deviation of the eikonal solution is kept as a diagnostic.
    """
    h = grid.spacing
    X = grid.nodes().reshape(-1, grid.ndim)
    inside = grid.inside_mask.reshape(-1)
    if domain.analytic:
        exact = chunked_rows(domain.distance, X)
    else:
        exact = _implicit_seed_distance(domain, grid, X)
    near = exact <= BAND * h
    seed = np.where(near, exact, np.inf)
    free = inside & ~near
    u = fast_sweep(seed.reshape(grid.dims), free.reshape(grid.dims), h)
    u = np.where(grid.inside_mask, u, 0.0)
    if domain.analytic:
        delta = np.where(grid.inside_mask, exact.reshape(grid.dims), 0.0)
        err = float(np.max(np.abs(u - delta)[grid.inside_mask])) if inside.any() else 0.0
    else:
        delta = u
        err = float("nan")
    return DistanceField(domain=domain, grid=grid, delta=delta, delta_eikonal=u, eikonal_error=err)


def _implicit_seed_distance(domain, grid, X):
    h = grid.spacing
    phi = chunked_rows(domain.level, X)
    g = chunked_rows(domain.grad, X)
    est = np.abs(phi) / np.maximum(np.linalg.norm(g, axis=1), 1e-12)
    out = np.full(len(X), np.inf)
    cand = est <= (BAND + 1) * h
    if np.any(cand):
        Z = chunked_rows(domain.newton_project, X[cand])
        out[cand] = np.linalg.norm(X[cand] - Z, axis=1)
    return out


def nearest_and_singular(domain, field, angle_tol=0.5):
    """Fill nearest points, normals, curvatures, grad delta and the singular mask.

    When grad delta turns by more than ``angle_tol`` radians between two
    neighbouring inside nodes, the ridge lies between them; the node with the
    larger distance (the one nearer the ridge) is marked singular.
    """
    g = field.grid
    ins = g.inside_mask
    X = g.nodes()[ins]
    d = g.ndim
    if domain.analytic:
        Z, comp = chunked_rows(domain.project, X)
    else:
        gd = np.stack(np.gradient(field.delta, g.spacing), axis=-1)[ins]
        start = X - field.delta[ins][:, None] * gd
        Z, comp = chunked_rows(domain.project, start)
    nrm = domain.normals(Z, comp)
    kap = domain.kappas(Z, comp)
    grad = -nrm

    def full(vals, width=None):
        shape = g.dims if width is None else g.dims + (width,)
        arr = np.full(shape, np.nan)
        arr[ins] = vals
        return arr

    field.nearest = full(Z, d)
    field.component = np.where(ins, 0, -1)
    field.component[ins] = comp
    field.normals = full(nrm, d)
    field.kappas = full(kap, domain.n)
    field.grad_delta = full(grad, d)

    cos_tol = np.cos(angle_tol)
    sing = np.zeros(g.dims, dtype=bool)
    G = np.where(ins[..., None], field.grad_delta, 0.0)
    for ax in range(d):
        a = [slice(None)] * d
        b = [slice(None)] * d
        a[ax], b[ax] = slice(0, -1), slice(1, None)
        a, b = tuple(a), tuple(b)
        both = ins[a] & ins[b]
        c = np.sum(G[a] * G[b], axis=-1)
        jump = both & (c < cos_tol)
        da, db = field.delta[a], field.delta[b]
        sing[a] |= jump & (da >= db)
        sing[b] |= jump & (db >= da)
    # a nearest point where the normal is undefined is ambiguous: mark it singular
    undefined = ~np.all(np.isfinite(field.normals), axis=-1) | ~np.all(np.isfinite(field.kappas), axis=-1)
    field.singular_mask = (sing | undefined) & ins
    return field


def _box_exit(Z, eta, lo, hi):
    """Distance along each ray z + t*eta at which it leaves the box [lo, hi]."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t_hi = np.where(eta > 0, (hi - Z) / eta, np.where(eta < 0, (lo - Z) / eta, np.inf))
    return np.min(t_hi, axis=1)


def ridge_distance(domain, Z, eta, delta_fn, h, t0=None, eps=None):
    """First t along z + t*eta where the segment stops being distance-minimising.

    The predicate delta(z + t eta) < t - eps is monotone in t (once a point
    beyond the ridge is reached, every later point is too), so the crossing
    is found by bisection between t0 and the exit from the bounding box,
    to a width far below h. Rays that reach the box, which carries any
    truncation faces, without crossing are censored there.
    Returns (rho_bar, censored).
    """
    Z = np.atleast_2d(Z)
    eta = np.atleast_2d(eta)
    m = len(Z)
    lo, hi = domain.bounding_box
    if eps is None:
        eps = 1e-10 * float(np.max(hi - lo))
    a = np.zeros(m) if t0 is None else np.asarray(t0, dtype=float).copy()
    b = np.maximum(_box_exit(Z, eta, lo, hi), a)
    end_bad = delta_fn(Z + b[:, None] * eta) < b - eps
    cens = ~end_bad
    rho = b.copy()
    idx = np.flatnonzero(end_bad)
    if idx.size:
        lo_t, hi_t = a[idx], b[idx]
        width = max(1e-12 * float(np.max(hi - lo)), 1e-6 * h)
        while np.max(hi_t - lo_t) > width:
            mid = 0.5 * (lo_t + hi_t)
            bad = delta_fn(Z[idx] + mid[:, None] * eta[idx]) < mid - eps
            hi_t = np.where(bad, mid, hi_t)
            lo_t = np.where(bad, lo_t, mid)
        rho[idx] = 0.5 * (lo_t + hi_t)
    return rho, cens


def _delta_fn(domain, field):
    if domain.analytic:
        return domain.distance
    interp = field.interpolator()
    return lambda P: interp(P)


def ridge_for_samples(domain, field, samples):
    """rho_bar at boundary samples; returns (rho_bar, censored)."""
    fn = _delta_fn(domain, field)
    h = field.grid.spacing
    eps = None if domain.analytic else 0.5 * h
    return ridge_distance(domain, samples.points, -samples.normals, fn, h, eps=eps)


def ridge_and_h(domain, field):
    """Ridge Lambda(x) = rho_bar(N(x)) and normalised distance h = delta / Lambda."""
    g = field.grid
    ins = g.inside_mask
    Z = field.nearest[ins]
    eta = -field.normals[ins]
    fn = _delta_fn(domain, field)
    eps = None if domain.analytic else 0.5 * g.spacing
    t0 = field.delta[ins] * (1 - 1e-12)

    def run(rows):
        return ridge_distance(domain, Z[rows], eta[rows], fn, g.spacing, t0=t0[rows], eps=eps)

    ok = np.all(np.isfinite(eta), axis=1)
    rho, cens = np.asarray(t0, dtype=float).copy(), np.zeros(len(Z), dtype=bool)
    if ok.any():
        rho[ok], cens[ok] = chunked_rows(run, np.flatnonzero(ok))
    Lam = np.full(g.dims, np.nan)
    Lam[ins] = rho
    censored = np.zeros(g.dims, dtype=bool)
    censored[ins] = cens
    with np.errstate(divide="ignore", invalid="ignore"):
        hf = np.clip(field.delta / Lam, 0.0, 1.0)
    hf = np.where(ins, hf, 0.0)
    hf[field.singular_mask] = 1.0
    hf[ins & (field.delta == 0)] = 0.0
    field.ridge_Lambda = Lam
    field.h_field = hf
    field.censored_mask = censored
    if censored.any():
        field.flags.append(f"ridge censored at truncation for {int(censored.sum())} nodes")
    return field


def build_field(domain, cells=None, spacing=None, angle_tol=0.5, ridge=True, check=True):
    """Grid, eikonal distance, nearest map, singular set and (optionally) ridge."""
    grid = make_grid(domain, cells=cells, spacing=spacing, check=check)
    f = solve_eikonal(domain, grid)
    nearest_and_singular(domain, f, angle_tol)
    if ridge:
        ridge_and_h(domain, f)
    return f


def boundary_layer_mask(field, layers=BAND):
    """Inside nodes at least ``layers`` cells from the singular set and the outside."""
    from scipy.ndimage import binary_dilation
    g = field.grid
    st = np.ones((3,) * g.ndim, dtype=bool)
    bad = ~g.inside_mask | field.singular_mask
    near = binary_dilation(bad, structure=st, iterations=layers)
    return g.inside_mask & ~near


# -- exports --------------------------------------------------------------

def slice2d(arr, axis=2, index=None):
    if arr.ndim == 2:
        return arr
    if index is None:
        index = arr.shape[axis] // 2
    return np.take(arr, index, axis=axis)


def write_pgm(path, arr2d, mask=None):
    """Write a 2D array as ASCII PGM (P2) scaled to 0..65535, plus a sidecar with min/max."""
    a = np.asarray(arr2d, dtype=float)
    valid = np.isfinite(a) if mask is None else (mask & np.isfinite(a))
    vmin = float(a[valid].min()) if valid.any() else 0.0
    vmax = float(a[valid].max()) if valid.any() else 0.0
    span = vmax - vmin if vmax > vmin else 1.0
    q = np.zeros(a.shape, dtype=np.int64)
    q[valid] = np.round((a[valid] - vmin) / span * 65535).astype(np.int64)
    rows, cols = q.shape
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"P2\n{cols} {rows}\n65535\n")
        for r in range(rows):
            fh.write(" ".join(str(int(v)) for v in q[r]) + "\n")
    with open(str(path) + ".txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"min {vmin!r}\nmax {vmax!r}\n")
    return vmin, vmax


def write_raw(path, arr, grid):
    """Flat little-endian float64 array with a text header next to it."""
    a = np.ascontiguousarray(np.asarray(arr, dtype="<f8"))
    a.tofile(path)
    with open(str(path) + ".hdr", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("dtype float64 little-endian\norder row-major\n")
        fh.write("dims " + " ".join(str(int(v)) for v in a.shape) + "\n")
        fh.write(f"spacing {grid.spacing!r}\n")
        fh.write("origin " + " ".join(repr(float(v)) for v in grid.origin) + "\n")


def read_raw(path):
    meta = {}
    with open(str(path) + ".hdr", encoding="utf-8") as fh:
        for line in fh:
            k, _, v = line.strip().partition(" ")
            meta[k] = v
    dims = tuple(int(v) for v in meta["dims"].split())
    return np.fromfile(path, dtype="<f8").reshape(dims), meta
