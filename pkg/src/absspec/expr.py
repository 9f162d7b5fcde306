"""Closed expression vocabulary for coefficient entries.

Entries are Python-syntax strings over the variables ``lam`` and ``x``,
named constants, numeric literals, the arithmetic operators ``+ - * / **``
and a handful of elementary functions.  Parsing goes through :mod:`ast`
with a whitelist, so nothing outside the vocabulary can be evaluated.
Compiled expressions broadcast over numpy arrays.
"""

from __future__ import annotations

import ast
import hashlib
import math

import numpy as np

__all__ = ["Expr", "ExprError", "FUNCTIONS", "parse_scalar"]

FUNCTIONS = {
    "tanh": np.tanh,
    "cosh": np.cosh,
    "sinh": np.sinh,
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": np.sqrt,
}
BUILTIN_CONSTANTS = {"pi": math.pi, "e": math.e, "I": 1j}
VARIABLES = ("lam", "x")

_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a**b,
}
_UNOPS = {ast.USub: lambda a: -a, ast.UAdd: lambda a: a}


class ExprError(ValueError):
    def __init__(self, message: str, col: int | None = None):
        super().__init__(message if col is None else f"{message} (column {col})")
        self.col = col


def _check(node: ast.AST, names: set[str]) -> None:
    if isinstance(node, ast.Expression):
        _check(node.body, names)
    elif isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float, complex)):
            raise ExprError(f"unsupported literal {node.value!r}", node.col_offset + 1)
    elif isinstance(node, ast.Name):
        if node.id not in names:
            raise ExprError(f"unknown name {node.id!r}", node.col_offset + 1)
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ExprError("unsupported operator", node.col_offset + 1)
        _check(node.left, names)
        _check(node.right, names)
    elif isinstance(node, ast.UnaryOp):
        if type(node.op) not in _UNOPS:
            raise ExprError("unsupported unary operator", node.col_offset + 1)
        _check(node.operand, names)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            raise ExprError("only whitelisted functions may be called", node.col_offset + 1)
        if len(node.args) != 1 or node.keywords:
            raise ExprError("functions take exactly one argument", node.col_offset + 1)
        _check(node.args[0], names)
    else:
        raise ExprError(f"unsupported syntax {type(node).__name__}",
                        getattr(node, "col_offset", 0) + 1)


def _eval(node, env):
    if isinstance(node, ast.Constant):
        return node.value
    if isinstance(node, ast.Name):
        return env[node.id]
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        return _UNOPS[type(node.op)](_eval(node.operand, env))
    if isinstance(node, ast.Call):
        return FUNCTIONS[node.func.id](_eval(node.args[0], env))
    raise AssertionError(node)


class Expr:
    """A parsed scalar expression in ``lam`` and ``x``.

    >>> Expr("lam - c", {"c": 2.0})(lam=3.0)
    (1+0j)
    """

    def __init__(self, source, constants: dict | None = None):
        if isinstance(source, (int, float, complex)) and not isinstance(source, bool):
            source = repr(complex(source)) if isinstance(source, complex) else repr(source)
        elif isinstance(source, (list, tuple)) and len(source) == 2:
            source = repr(complex(float(source[0]), float(source[1])))
        if not isinstance(source, str):
            raise ExprError(f"cannot build an expression from {source!r}")
        self.source = source.strip()
        self.constants = {k: complex(v) for k, v in (constants or {}).items()}
        for name in self.constants:
            if name in VARIABLES or name in FUNCTIONS:
                raise ExprError(f"constant name {name!r} is reserved")
        try:
            self._tree = ast.parse(self.source, mode="eval")
        except SyntaxError as exc:
            raise ExprError(f"syntax error in {self.source!r}: {exc.msg}", exc.offset) from None
        names = set(VARIABLES) | set(BUILTIN_CONSTANTS) | set(self.constants)
        _check(self._tree, names)
        self.free = {
            n.id for n in ast.walk(self._tree) if isinstance(n, ast.Name) and n.id in VARIABLES
        }

    @property
    def depends_on_x(self) -> bool:
        return "x" in self.free

    def __call__(self, lam=0.0, x=0.0):
        env = dict(BUILTIN_CONSTANTS)
        env.update(self.constants)
        env["lam"] = lam
        env["x"] = x
        out = _eval(self._tree.body, env)
        shape = np.broadcast(np.asarray(lam), np.asarray(x)).shape
        return np.broadcast_to(np.asarray(out, dtype=complex), shape) if shape else complex(out)

    def digest(self) -> str:
        payload = self.source + "|" + repr(sorted(self.constants.items()))
        return hashlib.sha256(payload.encode()).hexdigest()

    def __repr__(self):
        return f"Expr({self.source!r})"


def parse_scalar(text, constants: dict | None = None) -> complex:
    """Evaluate a constant expression such as ``"10*pi"`` or ``"-1+0.5*I"``."""
    e = Expr(text, constants)
    if e.free:
        raise ExprError(f"{text!r} must not depend on {sorted(e.free)}")
    return complex(e())
