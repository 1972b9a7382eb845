"""AST node types for property specifications.

A parsed property is a single ``Forall`` over one bound symbol (the
network input), whose body mixes logical connectives, comparisons,
arithmetic, indexing, network application, and argmax/argmin terms.
Concrete values are numpy arrays or python ints; symbolic leaves are the
bound symbol and anything derived from it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

__all__ = [
    "Expr",
    "Symbol",
    "Constant",
    "BoolConst",
    "ParamRef",
    "ParameterDecl",
    "NetworkRef",
    "NetworkApply",
    "ArgCmp",
    "Arith",
    "Compare",
    "IndexExpr",
    "Not",
    "And",
    "Or",
    "Implies",
    "Forall",
    "AtomExpr",
    "walk",
    "COMPARE_OPS",
]

COMPARE_OPS = ("<", "<=", ">", ">=", "==", "!=")


class Expr:
    """Base class for property expression nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class Symbol(Expr):
    name: str


class Constant(Expr):
    """A concrete value: numpy array/scalar, or a python int (e.g. a class index)."""

    __slots__ = ("value",)

    def __init__(self, value):
        if isinstance(value, (bool, np.bool_)):
            raise TypeError("use BoolConst for boolean constants")
        if isinstance(value, (int, np.integer)):
            value = int(value)
        elif not isinstance(value, np.ndarray):
            value = np.asarray(value, dtype=np.float64)
        object.__setattr__(self, "value", value)

    def __eq__(self, other):
        if not isinstance(other, Constant):
            return NotImplemented
        if isinstance(self.value, int) != isinstance(other.value, int):
            return False
        return np.array_equal(self.value, other.value)

    def __hash__(self):
        return hash(repr(self.value))

    def __repr__(self):
        return f"Constant({self.value!r})"


@dataclass(frozen=True)
class BoolConst(Expr):
    value: bool


@dataclass
class ParameterDecl:
    """A runtime-bound parameter declaration."""

    name: str
    type: str  # "int" | "float"
    default: Optional[object] = None
    value: Optional[object] = None


@dataclass(frozen=True)
class ParamRef(Expr):
    decl: ParameterDecl

    def __hash__(self):
        return hash(id(self.decl))


@dataclass
class NetworkRef:
    """A named network; the model is attached when the property is bound."""

    name: str
    graph: Optional[object] = None
    input_shape: Optional[tuple] = None
    output_shape: Optional[tuple] = None


@dataclass(frozen=True)
class NetworkApply(Expr):
    network: NetworkRef
    arg: Expr

    def __hash__(self):
        return hash((id(self.network), self.arg))


@dataclass(frozen=True)
class ArgCmp(Expr):
    mode: str  # "argmax" | "argmin"
    arg: Expr


@dataclass(frozen=True)
class Arith(Expr):
    op: str  # + - * /
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Compare(Expr):
    op: str  # < <= > >= == !=
    left: Expr
    right: Expr


class IndexExpr(Expr):
    """Basic indexing of a (possibly symbolic) tensor expression.

    The key is a plain python indexing object (int, slice, None, or a
    tuple of those); pre-binding it may contain ParamRef leaves.
    """

    __slots__ = ("base", "key")

    def __init__(self, base: Expr, key):
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "key", key)

    def __eq__(self, other):
        return isinstance(other, IndexExpr) and self.base == other.base and self.key == other.key

    def __repr__(self):
        return f"IndexExpr({self.base!r}, {self.key!r})"


@dataclass(frozen=True)
class Not(Expr):
    child: Expr


@dataclass(frozen=True)
class And(Expr):
    children: tuple


@dataclass(frozen=True)
class Or(Expr):
    children: tuple


@dataclass(frozen=True)
class Implies(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Forall(Expr):
    symbol: str
    body: Expr


class AtomExpr(Expr):
    """Canonical leaf: one linear inequality over input or output components."""

    __slots__ = ("atom",)

    def __init__(self, atom):
        object.__setattr__(self, "atom", atom)

    def __eq__(self, other):
        return isinstance(other, AtomExpr) and self.atom == other.atom

    def __repr__(self):
        return f"AtomExpr({self.atom!r})"


def walk(expr: Expr):
    """Yield every node of the expression tree, preorder."""
    yield expr
    if isinstance(expr, (Arith, Compare, Implies)):
        yield from walk(expr.left)
        yield from walk(expr.right)
    elif isinstance(expr, (And, Or)):
        for c in expr.children:
            yield from walk(c)
    elif isinstance(expr, Not):
        yield from walk(expr.child)
    elif isinstance(expr, Forall):
        yield from walk(expr.body)
    elif isinstance(expr, (NetworkApply, ArgCmp)):
        yield from walk(expr.arg)
    elif isinstance(expr, IndexExpr):
        yield from walk(expr.base)
