"""A small, safe expression language for level-set functions.

Expressions are parsed with :mod:`ast` and only arithmetic, a fixed set of
numpy functions, the coordinate names and two constants are accepted. The
compiled callable evaluates on arrays of shape (..., dim).
"""
from __future__ import annotations

import ast
import operator

import numpy as np

from .errors import ConfigurationError

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def _nary(fn):
    def call(*args):
        if len(args) < 2:
            raise ConfigurationError("min/max need at least two arguments")
        out = args[0]
        for a in args[1:]:
            out = fn(out, a)
        return out
    return call


FUNCTIONS = {
    "sqrt": np.sqrt, "sin": np.sin, "cos": np.cos, "tan": np.tan,
    "exp": np.exp, "log": np.log, "abs": np.abs, "cosh": np.cosh,
    "sinh": np.sinh, "tanh": np.tanh, "atan2": np.arctan2, "hypot": np.hypot,
    "min": _nary(np.minimum), "max": _nary(np.maximum),
}
CONSTANTS = {"pi": np.pi, "e": np.e}
COORDS = ("x", "y", "z", "w")


class LevelSet:
    """Compiled level-set function phi(x); the domain is {phi < 0}."""

    def __init__(self, source, dim):
        if dim < 1 or dim > len(COORDS):
            raise ConfigurationError(f"implicit domains support 1..{len(COORDS)} coordinates")
        self.source = source
        self.dim = dim
        try:
            tree = ast.parse(source, mode="eval")
        except SyntaxError as exc:
            raise ConfigurationError(f"cannot parse level-set expression: {exc.msg}",
                                     column=exc.offset) from None
        self._names = {COORDS[i]: i for i in range(dim)}
        self._names.update({f"x{i}": i for i in range(dim)})
        self._check(tree.body)
        self._tree = tree.body

    def _check(self, node):
        if isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise self._err(node, f"operator {type(node.op).__name__} not allowed")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if type(node.op) not in _UNARY:
                raise self._err(node, "unary operator not allowed")
            self._check(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
                raise self._err(node, "unknown function")
            if node.keywords:
                raise self._err(node, "keyword arguments not allowed")
            for a in node.args:
                self._check(a)
        elif isinstance(node, ast.Name):
            if node.id not in self._names and node.id not in CONSTANTS:
                raise self._err(node, f"unknown name {node.id!r}")
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise self._err(node, "only numeric constants allowed")
        else:
            raise self._err(node, f"{type(node).__name__} not allowed in expressions")

    @staticmethod
    def _err(node, msg):
        col = getattr(node, "col_offset", None)
        return ConfigurationError(f"level-set expression: {msg}",
                                  column=None if col is None else col + 1)

    def _eval(self, node, X):
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, X), self._eval(node.right, X))
        if isinstance(node, ast.UnaryOp):
            return _UNARY[type(node.op)](self._eval(node.operand, X))
        if isinstance(node, ast.Call):
            return FUNCTIONS[node.func.id](*[self._eval(a, X) for a in node.args])
        if isinstance(node, ast.Name):
            if node.id in CONSTANTS:
                return CONSTANTS[node.id]
            return X[..., self._names[node.id]]
        return float(node.value)

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        with np.errstate(all="ignore"):
            out = self._eval(self._tree, X)
        return np.broadcast_to(np.asarray(out, dtype=float), X.shape[:-1]).copy()
