"""Bind parameters and networks into a parsed property, folding constants.

After binding, every ParamRef is gone, every NetworkRef carries a graph,
and every subexpression that does not involve the quantified symbol has
been evaluated: network applications on concrete inputs run through the
reference executor, argmax/argmin of concrete tensors become ints, and
logical connectives over known truth values collapse.
"""

from __future__ import annotations

import numpy as np

from ..errors import MissingNetwork, MissingParameter, ShapeMismatch, UnsupportedExpression, VerifError
from ..execute import infer
from .nodes import (
    And,
    ArgCmp,
    Arith,
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
    ParamRef,
    Symbol,
)
from .parser import _fold_arith, _fold_compare

__all__ = ["bind", "fold"]


def bind(prop: Forall, params: dict, networks: dict) -> Forall:
    """Attach runtime parameter values and network graphs, then fold.

    ``params`` maps parameter names to strings (as given on a command
    line); ``networks`` maps network names to operation graphs.
    """
    from .parser import parse_dnnp  # noqa: F401  (documentation anchor only)

    decls = {}
    refs = {}
    for node in _walk_forall(prop):
        if isinstance(node, ParamRef):
            decls[node.decl.name] = node.decl
        elif isinstance(node, NetworkApply):
            refs[node.network.name] = node.network
    for extra in set(params) - set(decls):
        raise VerifError(f"unknown parameter {extra!r} (declared: {sorted(decls) or 'none'})")
    for name, decl in decls.items():
        if name in params:
            raw = params[name]
            try:
                decl.value = int(raw) if decl.type == "int" else float(raw)
            except (TypeError, ValueError):
                raise VerifError(f"parameter {name!r} expects {decl.type}, got {raw!r}") from None
        elif decl.default is not None:
            decl.value = int(decl.default) if decl.type == "int" else decl.default
        else:
            raise MissingParameter(name)
    for name, ref in refs.items():
        if name not in networks:
            raise MissingNetwork(name)
        graph = networks[name]
        if len(graph.inputs) != 1 or len(graph.outputs) != 1:
            raise UnsupportedExpression(
                f"network {name!r} must have one input and one output to appear in a property"
            )
        ref.graph = graph
        ref.input_shape = tuple(graph.input_shapes[0])
        ref.output_shape = tuple(graph.output_shapes[0])
    return Forall(prop.symbol, fold(prop.body))


def _walk_forall(prop):
    from .nodes import walk

    yield from walk(prop)
    # keys of IndexExpr may hold ParamRef leaves that walk() does not visit
    for node in walk(prop):
        if isinstance(node, IndexExpr):
            yield from _walk_key(node.key)


def _walk_key(key):
    if isinstance(key, tuple):
        for k in key:
            yield from _walk_key(k)
    elif isinstance(key, slice):
        for k in (key.start, key.stop, key.step):
            yield from _walk_key(k)
    elif isinstance(key, ParamRef):
        yield key


def _key_value(key):
    if isinstance(key, tuple):
        return tuple(_key_value(k) for k in key)
    if isinstance(key, slice):
        return slice(_key_value(key.start), _key_value(key.stop), _key_value(key.step))
    if isinstance(key, ParamRef):
        v = key.decl.value
        if not isinstance(v, int):
            raise UnsupportedExpression(f"parameter {key.decl.name!r} used as an index must be int")
        return v
    return key


def fold(expr: Expr) -> Expr:
    """Evaluate every fully-concrete subexpression."""
    if isinstance(expr, ParamRef):
        v = expr.decl.value
        if v is None:
            raise MissingParameter(expr.decl.name)
        return Constant(v)
    if isinstance(expr, (Symbol, Constant, BoolConst)):
        return expr
    if isinstance(expr, Arith):
        left, right = fold(expr.left), fold(expr.right)
        if isinstance(left, Constant) and isinstance(right, Constant):
            try:
                return Constant(_fold_arith(expr.op, left.value, right.value))
            except ValueError as e:
                raise ShapeMismatch(str(e)) from None
        return Arith(expr.op, left, right)
    if isinstance(expr, Compare):
        left, right = fold(expr.left), fold(expr.right)
        if isinstance(left, Constant) and isinstance(right, Constant):
            try:
                return BoolConst(_fold_compare(expr.op, left.value, right.value))
            except ValueError as e:
                raise ShapeMismatch(str(e)) from None
        return Compare(expr.op, left, right)
    if isinstance(expr, IndexExpr):
        base = fold(expr.base)
        key = _key_value(expr.key)
        if isinstance(base, Constant):
            try:
                v = np.asarray(base.value, dtype=np.float64)[key]
            except IndexError as e:
                raise ShapeMismatch(f"index out of range: {e}") from None
            return Constant(v)
        return IndexExpr(base, key)
    if isinstance(expr, NetworkApply):
        arg = fold(expr.arg)
        if isinstance(arg, Constant):
            if expr.network.graph is None:
                raise MissingNetwork(expr.network.name)
            x = np.asarray(arg.value, dtype=np.float64)
            want = expr.network.input_shape
            if tuple(x.shape) != tuple(want):
                raise ShapeMismatch(
                    f"network {expr.network.name!r} expects input shape {want}, got {tuple(x.shape)}"
                )
            out = infer(expr.network.graph, [x])[0]
            return Constant(out.data)
        return NetworkApply(expr.network, arg)
    if isinstance(expr, ArgCmp):
        arg = fold(expr.arg)
        if isinstance(arg, Constant):
            arr = np.asarray(arg.value, dtype=np.float64).reshape(-1)
            return Constant(int(np.argmax(arr)) if expr.mode == "argmax" else int(np.argmin(arr)))
        return ArgCmp(expr.mode, arg)
    if isinstance(expr, Not):
        c = fold(expr.child)
        if isinstance(c, BoolConst):
            return BoolConst(not c.value)
        return Not(c)
    if isinstance(expr, (And, Or)):
        is_and = isinstance(expr, And)
        kept = []
        for c in expr.children:
            fc = fold(c)
            if isinstance(fc, BoolConst):
                if fc.value != is_and:
                    return BoolConst(fc.value)  # dominator: False in And, True in Or
                continue  # neutral element
            kept.append(fc)
        if not kept:
            return BoolConst(is_and)
        if len(kept) == 1:
            return kept[0]
        return And(tuple(kept)) if is_and else Or(tuple(kept))
    if isinstance(expr, Implies):
        left, right = fold(expr.left), fold(expr.right)
        if isinstance(left, BoolConst):
            return fold(right) if left.value else BoolConst(True)
        if isinstance(right, BoolConst) and right.value:
            return BoolConst(True)
        return Implies(left, right)
    if isinstance(expr, Forall):
        return Forall(expr.symbol, fold(expr.body))
    raise UnsupportedExpression(f"cannot fold node {type(expr).__name__}")
