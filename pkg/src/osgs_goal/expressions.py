"""Tiny arithmetic expression language for user-defined problem files.

Grammar: numbers, ``x``, ``y``, ``pi``, ``e``, binary ``+ - * / ^`` (``**``
also accepted), unary minus and the functions ``exp``, ``cos``, ``sin``,
``sqrt``, ``abs``. Parsing goes through :mod:`ast` with a node whitelist;
nothing is ever passed to ``eval``.
"""
import ast
import operator

import numpy as np

_FUNCS = {"exp": np.exp, "cos": np.cos, "sin": np.sin, "sqrt": np.sqrt, "abs": np.abs}
_CONSTS = {"pi": np.pi, "e": np.e}
_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}


class ExpressionError(ValueError):
    pass


class Expression:
    """Compiled expression, callable on an array of points of shape (..., dim)."""

    def __init__(self, source):
        if isinstance(source, (int, float)):
            source = repr(float(source))
        if not isinstance(source, str):
            raise ExpressionError(f"expression must be a string or number, got {type(source).__name__}")
        self.source = source
        try:
            tree = ast.parse(source.replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {source!r}: {exc.msg}") from None
        self._tree = tree.body
        self._check(self._tree)

    def _check(self, node):
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise ExpressionError(f"unsupported literal {node.value!r} in {self.source!r}")
        elif isinstance(node, ast.Name):
            if node.id not in ("x", "y") and node.id not in _CONSTS:
                raise ExpressionError(f"unknown name {node.id!r} in {self.source!r}")
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ExpressionError(f"unsupported operator in {self.source!r}")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if type(node.op) not in _UNARY:
                raise ExpressionError(f"unsupported unary operator in {self.source!r}")
            self._check(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
                raise ExpressionError(f"unsupported function call in {self.source!r}")
            if len(node.args) != 1 or node.keywords:
                raise ExpressionError(f"functions take exactly one argument in {self.source!r}")
            self._check(node.args[0])
        else:
            raise ExpressionError(f"unsupported syntax {type(node).__name__} in {self.source!r}")

    def _eval(self, node, env):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return env[node.id] if node.id in env else _CONSTS[node.id]
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            return _UNARY[type(node.op)](self._eval(node.operand, env))
        return _FUNCS[node.func.id](self._eval(node.args[0], env))

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        env = {"x": points[..., 0]}
        env["y"] = points[..., 1] if points.shape[-1] > 1 else np.zeros_like(env["x"])
        value = self._eval(self._tree, env)
        return np.broadcast_to(np.asarray(value, dtype=float), points.shape[:-1]).copy()

    def __repr__(self):
        return f"Expression({self.source!r})"
