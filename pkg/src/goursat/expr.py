"""A small arithmetic expression language for analytic data.

Grammar: numbers, the names x0..x3 and pi, the binary operators + - * / **,
unary minus, and calls to sin, cos, exp. Anything else is rejected.
"""
import ast

import numpy as np

_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_NAMES = {"x0", "x1", "x2", "x3", "pi"}
_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply, ast.Div: np.divide, ast.Pow: np.power}


class ExpressionError(ValueError):
    pass


def _check(node):
    if isinstance(node, ast.Expression):
        return _check(node.body)
    if isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
            raise ExpressionError(f"unsupported literal {node.value!r}")
        return
    if isinstance(node, ast.Name):
        if node.id not in _NAMES:
            raise ExpressionError(f"unknown name {node.id!r} (allowed: x0, x1, x2, x3, pi)")
        return
    if isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ExpressionError(f"unsupported operator {type(node.op).__name__}")
        _check(node.left)
        _check(node.right)
        return
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        _check(node.operand)
        return
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
            raise ExpressionError("only sin, cos and exp may be called")
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"{node.func.id} takes exactly one argument")
        _check(node.args[0])
        return
    raise ExpressionError(f"unsupported syntax {type(node).__name__}")


def _eval(node, env):
    if isinstance(node, ast.Expression):
        return _eval(node.body, env)
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return env[node.id]
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        v = _eval(node.operand, env)
        return -v if isinstance(node.op, ast.USub) else v
    return _FUNCS[node.func.id](_eval(node.args[0], env))


class Expression:
    """Parsed expression; call with points X (..., 4)."""

    def __init__(self, text):
        self.text = text.strip()
        try:
            tree = ast.parse(self.text, mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from exc
        _check(tree)
        self._tree = tree

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        env = {f"x{k}": X[..., k] for k in range(4)}
        env["pi"] = np.pi
        with np.errstate(all="ignore"):
            out = _eval(self._tree, env)
        return np.broadcast_to(np.asarray(out, dtype=float), X.shape[:-1]).copy()

    def __repr__(self):
        return f"Expression({self.text!r})"
