"""Elementary symmetric functions and the inequalities built on them.

The elementary symmetric functions are read off the coefficients of the
generating polynomial prod(1 + v_i t), which is expanded one factor at a time.
This costs O(n^2) and avoids the cancellation of power-sum formulas.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PreconditionError


@dataclass(frozen=True)
class SymVector:
    """A finite vector of reals, e.g. the principal curvatures at a point."""

    entries: tuple

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=float).ravel()
        if arr.size < 1:
            raise DomainError("SymVector needs at least one entry")
        if not np.all(np.isfinite(arr)):
            raise DomainError("SymVector entries must be finite")
        object.__setattr__(self, "entries", tuple(float(x) for x in arr))

    @property
    def n(self):
        return len(self.entries)

    def as_array(self):
        return np.array(self.entries)


def _as_array(v):
    if isinstance(v, SymVector):
        return v.as_array()
    return SymVector(tuple(np.ravel(v))).as_array()


def sigma_all(v):
    """Return [sigma_0, ..., sigma_n] of the vector ``v``."""
    x = _as_array(v)
    coef = np.zeros(x.size + 1)
    coef[0] = 1.0
    for i, xi in enumerate(x):
        # multiply the polynomial by (1 + xi t), highest degree first
        coef[1:i + 2] = coef[1:i + 2] + xi * coef[0:i + 1]
    return coef


def sigma_k(v, k):
    """k-th elementary symmetric function of ``v``; sigma_0 = 1."""
    x = _as_array(v)
    if not isinstance(k, (int, np.integer)) or k < 0 or k > x.size:
        raise DomainError(f"k must be an integer in [0, {x.size}], got {k!r}")
    return float(sigma_all(x)[k])


def sigma_rows(kappas):
    """Vectorised sigma_0..sigma_n for each row of an (m, n) array."""
    K = np.atleast_2d(np.asarray(kappas, dtype=float))
    m, n = K.shape
    coef = np.zeros((m, n + 1))
    coef[:, 0] = 1.0
    for i in range(n):
        coef[:, 1:i + 2] = coef[:, 1:i + 2] + K[:, i:i + 1] * coef[:, 0:i + 1]
    return coef


def chain_constant(n, k):
    """c(n, k) = n (n - k + 1) / k."""
    return n * (n - k + 1) / k


@dataclass(frozen=True)
class ChainReport:
    terms: tuple
    holds: bool
    equality_case: bool


def newton_chain(v, tol=1e-12):
    """Evaluate the chain c(n,k) sigma_{k-1}/sigma_k for k = n, ..., 1.

    ``holds`` is true when the terms are non-increasing up to ``tol`` relative
    to the largest term. ``equality_case`` tests the entries directly, since
    equality of the chain terms is fragile in floating point.
    """
    x = _as_array(v)
    if np.any(x <= 0):
        bad = int(np.flatnonzero(x <= 0)[0])
        raise DomainError(f"newton_chain needs strictly positive entries; entry {bad} is {x[bad]}")
    n = x.size
    s = sigma_all(x)
    terms = tuple(chain_constant(n, k) * s[k - 1] / s[k] for k in range(n, 0, -1))
    t = np.array(terms)
    scale = np.max(np.abs(t))
    holds = bool(np.all(np.diff(t) <= tol * scale))
    equality = bool(x.max() - x.min() <= tol * x.max())
    return ChainReport(terms=terms, holds=holds, equality_case=equality)


def curvature_sum_bound(kappa, delta):
    """Return (sum k_i/(1 - delta k_i), n H/(n - delta H)) with H = sum k_i.

    The first value is never smaller than the second when every factor
    1 - delta k_i is positive. A non-positive factor raises
    PreconditionError carrying the offending index.
    """
    k = _as_array(kappa)
    delta = float(delta)
    if delta < 0 or not np.isfinite(delta):
        raise DomainError(f"delta must be finite and non-negative, got {delta}")
    fac = 1.0 - delta * k
    if np.any(fac <= 0):
        i = int(np.flatnonzero(fac <= 0)[0])
        raise PreconditionError(
            f"1 - delta*kappa[{i}] = {fac[i]:.6g} is not positive (kappa[{i}]={k[i]}, delta={delta})",
            index=i)
    n = k.size
    H = float(np.sum(k))
    lhs = float(np.sum(k / fac))
    rhs = n * H / (n - delta * H)
    return lhs, rhs


def curvature_sum_fields(kappas, delta):
    """Vectorised form of :func:`curvature_sum_bound`.

    ``kappas`` has shape (m, n) and ``delta`` shape (m,). Rows with a
    non-positive factor get NaN in both outputs and True in the returned mask.
    """
    K = np.atleast_2d(np.asarray(kappas, dtype=float))
    d = np.asarray(delta, dtype=float).reshape(-1)
    n = K.shape[1]
    fac = 1.0 - d[:, None] * K
    bad = np.any(fac <= 0, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        lhs = np.sum(K / fac, axis=1)
        H = K.sum(axis=1)
        rhs = n * H / (n - d * H)
    lhs[bad] = np.nan
    rhs[bad] = np.nan
    return lhs, rhs, bad
