"""Deterministic chunked parallelism.

Work is split into fixed-size chunks whose boundaries do not depend on the
worker count, and results are reassembled in chunk order. A run therefore
produces the same bytes whether it uses one thread or many.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK = 32768
_threads = 1


def set_threads(n):
    """Cap the number of worker threads used by chunked operations."""
    global _threads
    _threads = max(1, int(n))


def get_threads():
    return _threads


def chunked_map(fn, n, chunk=CHUNK):
    """Apply ``fn(start, stop)`` over fixed chunks of range(n), in order."""
    bounds = [(s, min(s + chunk, n)) for s in range(0, n, chunk)]
    if _threads == 1 or len(bounds) <= 1:
        return [fn(a, b) for a, b in bounds]
    with ThreadPoolExecutor(max_workers=_threads) as ex:
        return list(ex.map(lambda ab: fn(*ab), bounds))


def chunked_rows(fn, X, chunk=CHUNK):
    """Row-chunked evaluation of ``fn`` on X; tuple outputs are concatenated per slot."""
    parts = chunked_map(lambda a, b: fn(X[a:b]), len(X), chunk)
    if not parts:
        return fn(X[:0])
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate([p[i] for p in parts]) for i in range(len(parts[0])))
    return np.concatenate(parts)
