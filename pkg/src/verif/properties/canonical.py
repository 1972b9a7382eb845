"""Lower a bound property to a boolean combination of linear atoms.

Each atom is one linear inequality over either the flat input vector or
the flat output vector of the (single) network the property applies.
Tensor comparisons expand elementwise, argmax/argmin equalities expand
into pairwise strict comparisons, and == / != lower to inequality pairs.
Comparisons whose sides cancel (zero coefficients everywhere) fold to
boolean constants.
"""

from __future__ import annotations

import numpy as np

from ..errors import MissingNetwork, MixedAtom, NonlinearAtom, ShapeMismatch, UnsupportedExpression
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
    walk,
)

__all__ = ["LinearAtom", "canonicalize", "ARGMAX_TIES_FALSIFY"]

# Policy: argmax(N(x)) == c lowers to strict pairwise comparisons
# (y_c > y_j for every other class j), so an exact tie falsifies the
# equality. This is the violation-finding reading of robustness.
ARGMAX_TIES_FALSIFY = True

_FLIP = {"<": ">=", "<=": ">", ">": "<=", ">=": "<"}


class LinearAtom:
    """coeffs . v  (op)  rhs over one variable space ('input' or 'output')."""

    __slots__ = ("space", "coeffs", "op", "rhs")

    def __init__(self, space: str, coeffs: np.ndarray, op: str, rhs: float):
        if space not in ("input", "output"):
            raise ValueError(f"bad atom space {space!r}")
        if op not in ("<", "<=", ">", ">="):
            raise ValueError(f"bad atom comparator {op!r}")
        coeffs = np.asarray(coeffs, dtype=np.float64).reshape(-1)
        if not np.any(coeffs):
            raise ValueError("a linear atom needs at least one nonzero coefficient")
        coeffs.setflags(write=False)
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "rhs", float(rhs))

    def __setattr__(self, name, value):
        raise AttributeError("LinearAtom is immutable")

    def negated(self) -> "LinearAtom":
        return LinearAtom(self.space, self.coeffs, _FLIP[self.op], self.rhs)

    def satisfied(self, v: np.ndarray):
        """Truth of the atom at points ``v`` (last axis is the variable axis)."""
        lhs = np.asarray(v, dtype=np.float64) @ self.coeffs
        if self.op == "<":
            return lhs < self.rhs
        if self.op == "<=":
            return lhs <= self.rhs
        if self.op == ">":
            return lhs > self.rhs
        return lhs >= self.rhs

    def __eq__(self, other):
        return (
            isinstance(other, LinearAtom)
            and self.space == other.space
            and self.op == other.op
            and self.rhs == other.rhs
            and np.array_equal(self.coeffs, other.coeffs)
        )

    def __hash__(self):
        return hash((self.space, self.op, self.rhs, self.coeffs.tobytes()))

    def __repr__(self):
        terms = " + ".join(f"{c:g}*{self.space[0]}{i}" for i, c in enumerate(self.coeffs) if c)
        return f"LinearAtom({terms} {self.op} {self.rhs:g})"


class _Form:
    """An affine map: value = in_c . x + out_c . y + const, elementwise."""

    __slots__ = ("const", "in_c", "out_c")

    def __init__(self, const, in_c=None, out_c=None):
        self.const = np.asarray(const, dtype=np.float64)
        self.in_c = in_c
        self.out_c = out_c

    @property
    def shape(self):
        return self.const.shape

    def is_const(self):
        return self.in_c is None and self.out_c is None


def _bcast_coeffs(c, shape, dim):
    return None if c is None else np.broadcast_to(c, tuple(shape) + (dim,))


def _combine(a: _Form, b: _Form, sign: float, n: int, m: int) -> _Form:
    try:
        shape = np.broadcast_shapes(a.shape, b.shape)
        const = a.const + sign * b.const
    except ValueError as e:
        raise ShapeMismatch(str(e)) from None

    def merge(ca, cb, dim):
        if ca is None and cb is None:
            return None
        ca = _bcast_coeffs(ca, shape, dim)
        cb = _bcast_coeffs(cb, shape, dim)
        if ca is None:
            return sign * cb
        if cb is None:
            return np.array(ca)
        return ca + sign * cb

    return _Form(const, merge(a.in_c, b.in_c, n), merge(a.out_c, b.out_c, m))


def _scale(form: _Form, factor: np.ndarray, n: int, m: int, divide: bool) -> _Form:
    factor = np.asarray(factor, dtype=np.float64)
    if divide and np.any(factor == 0.0):
        raise NonlinearAtom("division by a zero constant")
    try:
        const = form.const / factor if divide else form.const * factor
    except ValueError as e:
        raise ShapeMismatch(str(e)) from None

    def one(c, dim):
        if c is None:
            return None
        f = factor[..., None]
        scaled = c / f if divide else c * f
        return np.broadcast_to(scaled, tuple(const.shape) + (dim,))

    return _Form(const, one(form.in_c, n), one(form.out_c, m))


class _Canonicalizer:
    def __init__(self, prop: Forall):
        self.symbol = prop.symbol
        nets = [node.network for node in walk(prop) if isinstance(node, NetworkApply)]
        names = {ref.name for ref in nets}
        if len(names) > 1:
            raise UnsupportedExpression(f"property applies several networks: {sorted(names)}")
        self.net = nets[0] if nets else None
        if self.net is None:
            raise UnsupportedExpression("property never applies a network; nothing to verify")
        if self.net.graph is None:
            raise MissingNetwork(self.net.name)
        self.input_shape = tuple(self.net.input_shape)
        self.output_shape = tuple(self.net.output_shape)
        self.n = int(np.prod(self.input_shape)) if self.input_shape else 1
        self.m = int(np.prod(self.output_shape)) if self.output_shape else 1

    # -- affine extraction -------------------------------------------------

    def form(self, expr: Expr) -> _Form:
        if isinstance(expr, Constant):
            return _Form(np.asarray(expr.value, dtype=np.float64))
        if isinstance(expr, Symbol):
            eye = np.eye(self.n).reshape(self.input_shape + (self.n,))
            return _Form(np.zeros(self.input_shape), in_c=eye)
        if isinstance(expr, NetworkApply):
            if not isinstance(expr.arg, Symbol):
                raise NonlinearAtom(
                    "the network must be applied directly to the quantified symbol "
                    "or to a concrete input"
                )
            eye = np.eye(self.m).reshape(self.output_shape + (self.m,))
            return _Form(np.zeros(self.output_shape), out_c=eye)
        if isinstance(expr, Arith):
            if expr.op in ("+", "-"):
                return _combine(
                    self.form(expr.left), self.form(expr.right), 1.0 if expr.op == "+" else -1.0,
                    self.n, self.m,
                )
            left, right = self.form(expr.left), self.form(expr.right)
            if expr.op == "*":
                if right.is_const():
                    return _scale(left, right.const, self.n, self.m, divide=False)
                if left.is_const():
                    return _scale(right, left.const, self.n, self.m, divide=False)
                raise NonlinearAtom("product of two symbolic terms")
            if expr.op == "/":
                if not right.is_const():
                    raise NonlinearAtom("division by a symbolic term")
                return _scale(left, right.const, self.n, self.m, divide=True)
        if isinstance(expr, IndexExpr):
            base = self.form(expr.base)
            key = expr.key
            if key is Ellipsis or (isinstance(key, tuple) and Ellipsis in key):
                raise UnsupportedExpression("ellipsis indexing is not supported")
            try:
                const = base.const[key]
                in_c = None if base.in_c is None else base.in_c[key]
                out_c = None if base.out_c is None else base.out_c[key]
            except IndexError as e:
                raise ShapeMismatch(f"index out of range: {e}") from None
            return _Form(const, in_c, out_c)
        if isinstance(expr, ArgCmp):
            raise NonlinearAtom("argmax/argmin cannot appear inside arithmetic")
        raise UnsupportedExpression(f"cannot linearize node {type(expr).__name__}")

    # -- atom construction ---------------------------------------------------

    def _element_atom(self, op: str, in_row, out_row, const: float) -> Expr:
        has_in = in_row is not None and bool(np.any(in_row))
        has_out = out_row is not None and bool(np.any(out_row))
        if has_in and has_out:
            raise MixedAtom("an atomic constraint mixes input and output variables")
        if not has_in and not has_out:
            return BoolConst(_scalar_truth(op, const))
        space = "input" if has_in else "output"
        coeffs = in_row if has_in else out_row
        if op == "==":
            return And(
                (
                    AtomExpr(LinearAtom(space, coeffs, "<=", -const)),
                    AtomExpr(LinearAtom(space, coeffs, ">=", -const)),
                )
            )
        if op == "!=":
            return Or(
                (
                    AtomExpr(LinearAtom(space, coeffs, "<", -const)),
                    AtomExpr(LinearAtom(space, coeffs, ">", -const)),
                )
            )
        return AtomExpr(LinearAtom(space, coeffs, op, -const))

    def compare(self, expr: Compare) -> Expr:
        if isinstance(expr.left, ArgCmp) or isinstance(expr.right, ArgCmp):
            return self._argcmp_compare(expr)
        diff = _combine(self.form(expr.left), self.form(expr.right), -1.0, self.n, self.m)
        atoms = []
        flat_const = np.atleast_1d(diff.const.reshape(-1))
        in_rows = None if diff.in_c is None else diff.in_c.reshape(-1, self.n)
        out_rows = None if diff.out_c is None else diff.out_c.reshape(-1, self.m)
        for i in range(flat_const.size):
            atoms.append(
                self._element_atom(
                    expr.op,
                    None if in_rows is None else in_rows[i],
                    None if out_rows is None else out_rows[i],
                    float(flat_const[i]),
                )
            )
        if len(atoms) == 1:
            return atoms[0]
        return And(tuple(atoms))

    def _argcmp_compare(self, expr: Compare) -> Expr:
        if isinstance(expr.left, ArgCmp) and isinstance(expr.right, ArgCmp):
            raise UnsupportedExpression(
                "comparison of two symbolic argmax/argmin terms; bind one side to a concrete input"
            )
        if expr.op not in ("==", "!="):
            raise UnsupportedExpression("argmax/argmin only supports == and != comparisons")
        ac, other = (
            (expr.left, expr.right) if isinstance(expr.left, ArgCmp) else (expr.right, expr.left)
        )
        if not (isinstance(other, Constant) and isinstance(other.value, int)):
            raise UnsupportedExpression("argmax/argmin compares against a concrete class index")
        c = other.value
        form = self.form(ac.arg)
        if form.in_c is not None and form.out_c is not None:
            raise MixedAtom("argmax argument mixes input and output variables")
        space = "output" if form.out_c is not None else "input"
        dim = self.m if space == "output" else self.n
        rows = (form.out_c if space == "output" else form.in_c)
        if rows is None:
            raise UnsupportedExpression("argmax of a constant should have been folded")
        rows = rows.reshape(-1, dim)
        consts = form.const.reshape(-1)
        k = consts.size
        if not 0 <= c < k:
            eq = BoolConst(False)
        else:
            cmp_op = ">" if ac.mode == "argmax" else "<"
            parts = []
            for j in range(k):
                if j == c:
                    continue
                coeffs = rows[c] - rows[j]
                const = float(consts[c] - consts[j])
                if not np.any(coeffs):
                    parts.append(BoolConst(_scalar_truth(cmp_op, const)))
                else:
                    parts.append(AtomExpr(LinearAtom(space, coeffs, cmp_op, -const)))
            eq = And(tuple(parts)) if len(parts) != 1 else parts[0]
        return Not(eq) if expr.op == "!=" else eq

    # -- formula walk -----------------------------------------------------

    def lower(self, expr: Expr) -> Expr:
        if isinstance(expr, BoolConst):
            return expr
        if isinstance(expr, And):
            return And(tuple(self.lower(c) for c in expr.children))
        if isinstance(expr, Or):
            return Or(tuple(self.lower(c) for c in expr.children))
        if isinstance(expr, Not):
            return Not(self.lower(expr.child))
        if isinstance(expr, Implies):
            return Implies(self.lower(expr.left), self.lower(expr.right))
        if isinstance(expr, Compare):
            return self.compare(expr)
        raise UnsupportedExpression(
            f"{type(expr).__name__} cannot appear where a logical formula is expected"
        )


def _scalar_truth(op: str, const: float) -> bool:
    # the comparison value_left - value_right = const against zero
    if op == "<":
        return const < 0
    if op == "<=":
        return const <= 0
    if op == ">":
        return const > 0
    if op == ">=":
        return const >= 0
    if op == "==":
        return const == 0
    return const != 0


def canonicalize(prop: Forall) -> Forall:
    """Rewrite a bound property so every leaf is a linear atom.

    The result is a Forall whose body combines AtomExpr and BoolConst
    leaves with And/Or/Not/Implies. Every atom references input variables
    or output variables, never both.
    """
    can = _Canonicalizer(prop)
    body = can.lower(prop.body)
    for node in walk(body):
        assert not isinstance(node, AtomExpr) or node.atom.space in ("input", "output")
    return Forall(prop.symbol, body)
