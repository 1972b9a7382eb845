"""Reference interpreter for bound property expressions.

Evaluates a property at one concrete witness for the quantified symbol.
This is the semantic ground truth used to validate counterexamples and to
check that binding, canonicalization, and reduction preserve meaning.
"""

from __future__ import annotations

import numpy as np

from ..errors import MissingNetwork, UnsupportedExpression
from ..execute import infer
from .nodes import (
    And,
    ArgCmp,
    Arith,
    AtomExpr,
    BoolConst,
    Compare,
    Constant,
    Expr,
    Forall,
    Implies,
    IndexExpr,
    NetworkApply,
    Not,
    Or,
    Symbol,
)
from .parser import _fold_arith, _fold_compare

__all__ = ["evaluate", "holds_at"]


def evaluate(expr: Expr, x: np.ndarray):
    """Evaluate a bound expression with the quantified symbol set to ``x``."""
    if isinstance(expr, Forall):
        return evaluate(expr.body, x)
    if isinstance(expr, Symbol):
        return x
    if isinstance(expr, Constant):
        return expr.value
    if isinstance(expr, BoolConst):
        return expr.value
    if isinstance(expr, Arith):
        return _fold_arith(expr.op, evaluate(expr.left, x), evaluate(expr.right, x))
    if isinstance(expr, Compare):
        return _fold_compare(expr.op, evaluate(expr.left, x), evaluate(expr.right, x))
    if isinstance(expr, IndexExpr):
        return np.asarray(evaluate(expr.base, x), dtype=np.float64)[expr.key]
    if isinstance(expr, NetworkApply):
        if expr.network.graph is None:
            raise MissingNetwork(expr.network.name)
        arg = np.asarray(evaluate(expr.arg, x), dtype=np.float64)
        return infer(expr.network.graph, [arg])[0].data
    if isinstance(expr, ArgCmp):
        arr = np.asarray(evaluate(expr.arg, x), dtype=np.float64).reshape(-1)
        return int(np.argmax(arr)) if expr.mode == "argmax" else int(np.argmin(arr))
    if isinstance(expr, Not):
        return not evaluate(expr.child, x)
    if isinstance(expr, And):
        return all(bool(evaluate(c, x)) for c in expr.children)
    if isinstance(expr, Or):
        return any(bool(evaluate(c, x)) for c in expr.children)
    if isinstance(expr, Implies):
        return (not evaluate(expr.left, x)) or bool(evaluate(expr.right, x))
    if isinstance(expr, AtomExpr):
        raise UnsupportedExpression("canonical atoms need input and output vectors; use the reducer")
    raise UnsupportedExpression(f"cannot evaluate node {type(expr).__name__}")


def holds_at(prop: Forall, x: np.ndarray) -> bool:
    """True iff the property body is satisfied at the witness ``x``."""
    return bool(evaluate(prop, np.asarray(x, dtype=np.float64)))
