"""Property reduction to canonical reachability problems.

The negated property is put in disjunctive normal form over linear atoms.
Each disjunct becomes one problem: its output atoms turn into a halfspace
polytope, the polytope into a two-layer suffix network appended to the
original network, and its input atoms into an input polytope. The
original property is valid iff every reduced problem is (a violation of
problem i is an input inside its polytope where the suffixed network's
first output does not exceed its second).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DnfTooLarge, EmptyPolytope, NotAViolation, UnboundedInput
from .execute import infer
from .ir import GraphBuilder, OperationGraph, TensorValue, chain_graphs, topological_order
from .properties.canonical import LinearAtom
from .properties.nodes import And, AtomExpr, BoolConst, Forall, Implies, Not, Or

__all__ = [
    "LinearAtom",
    "HalfspacePolytope",
    "ReducedProblem",
    "negate_and_dnf",
    "disjunct_to_hpolytope",
    "construct_suffix",
    "reduce",
    "map_counterexample",
    "bounding_box",
    "DNF_LIMIT",
]

DNF_LIMIT = 4096

CANONICAL_PROPERTY = "forall x in H_in: N'(x)[0] > N'(x)[1]"


class HalfspacePolytope:
    """The set {v : A v <= b}; rows may be empty (the whole space)."""

    __slots__ = ("A", "b")

    def __init__(self, A, b):
        A = np.asarray(A, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64).reshape(-1)
        if A.ndim != 2:
            A = A.reshape(len(b), -1)
        if A.shape[0] != b.shape[0]:
            raise ValueError(f"A has {A.shape[0]} rows but b has {b.shape[0]} entries")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    def __setattr__(self, name, value):
        raise AttributeError("HalfspacePolytope is immutable")

    @property
    def rows(self) -> int:
        return self.A.shape[0]

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def contains(self, v: np.ndarray):
        """Membership test; ``v`` may carry leading batch axes."""
        v = np.asarray(v, dtype=np.float64)
        if self.rows == 0:
            return np.ones(v.shape[:-1], dtype=bool) if v.ndim > 1 else True
        sat = v @ self.A.T <= self.b
        return sat.all(axis=-1)

    def __repr__(self):
        return f"HalfspacePolytope({self.rows} rows, dim {self.dim})"


@dataclass(frozen=True)
class ReducedProblem:
    """One canonical reachability problem produced by the reducer.

    A violation is an input inside ``input_polytope`` (flattened) for
    which ``network`` (the suffixed composition) yields out[0] <= out[1].
    """

    network: OperationGraph
    input_polytope: HalfspacePolytope
    input_shape: tuple
    disjunct_index: int
    atoms: tuple = ()  # provenance: the disjunct this problem encodes
    canonical_property: str = CANONICAL_PROPERTY

    @property
    def input_dim(self) -> int:
        return int(np.prod(self.input_shape)) if self.input_shape else 1

    def violated_at(self, x: np.ndarray) -> bool:
        out = infer(self.network, [np.asarray(x, dtype=np.float64).reshape(self.input_shape)])
        flat = out[0].data.reshape(-1)
        return bool(flat[0] <= flat[1])


# --------------------------------------------------------------------------
# negation and DNF
# --------------------------------------------------------------------------


def _nnf(expr, negate: bool):
    """Push negation down to atoms; returns ('atom', a) | ('and'|'or', [..]) | bool."""
    if isinstance(expr, BoolConst):
        return expr.value != negate
    if isinstance(expr, AtomExpr):
        return ("atom", expr.atom.negated() if negate else expr.atom)
    if isinstance(expr, Not):
        return _nnf(expr.child, not negate)
    if isinstance(expr, And):
        kids = [_nnf(c, negate) for c in expr.children]
        return ("or" if negate else "and", kids)
    if isinstance(expr, Or):
        kids = [_nnf(c, negate) for c in expr.children]
        return ("and" if negate else "or", kids)
    if isinstance(expr, Implies):
        # a -> b == ~a | b; negated: a & ~b
        if negate:
            return ("and", [_nnf(expr.left, False), _nnf(expr.right, True)])
        return ("or", [_nnf(expr.left, True), _nnf(expr.right, False)])
    raise TypeError(f"not a canonical formula node: {type(expr).__name__}")


def _dnf(tree) -> list:
    if tree is True:
        return [[]]
    if tree is False:
        return []
    kind = tree[0]
    if kind == "atom":
        return [[tree[1]]]
    if kind == "or":
        out = []
        for child in tree[1]:
            out.extend(_dnf(child))
            if len(out) > DNF_LIMIT:
                raise DnfTooLarge(len(out), DNF_LIMIT)
        return out
    # conjunction: distribute
    disjuncts = [[]]
    for child in tree[1]:
        sub = _dnf(child)
        merged = []
        for d in disjuncts:
            for s in sub:
                merged.append(d + s)
                if len(merged) > DNF_LIMIT:
                    raise DnfTooLarge(len(merged), DNF_LIMIT)
        disjuncts = merged
        if not disjuncts:
            return []
    return disjuncts


def negate_and_dnf(body) -> list:
    """DNF of the negated property body as lists of LinearAtom conjuncts.

    The returned disjunction is logically equivalent to "body is false";
    an empty list means the negation is unsatisfiable, and a disjunct with
    no atoms means the negation is trivially true.
    """
    disjuncts = _dnf(_nnf(body, True))
    if any(not d for d in disjuncts):
        return [[]]  # an empty conjunct is true and subsumes the rest
    return disjuncts


# --------------------------------------------------------------------------
# polytope and suffix construction
# --------------------------------------------------------------------------


def predecessor(b: float) -> float:
    """Largest float64 strictly below ``b``."""
    return float(np.nextafter(b, -np.inf))


def disjunct_to_hpolytope(conjunct, dim: Optional[int] = None) -> HalfspacePolytope:
    """Turn a conjunction of linear atoms into non-strict rows A v <= b.

    Greater-than comparators flip by negating both sides; strict rows
    close by decrementing the bound to its float64 predecessor.
    """
    atoms = list(conjunct)
    if dim is None:
        if not atoms:
            return HalfspacePolytope(np.zeros((0, 0)), np.zeros(0))
        dim = atoms[0].coeffs.size
    rows = np.zeros((len(atoms), dim))
    bounds = np.zeros(len(atoms))
    for i, atom in enumerate(atoms):
        coeffs, op, rhs = atom.coeffs, atom.op, atom.rhs
        if op == ">=":
            coeffs, op, rhs = -coeffs, "<=", -rhs
        elif op == ">":
            coeffs, op, rhs = -coeffs, "<", -rhs
        if op == "<":
            rhs = predecessor(rhs)
        rows[i] = coeffs
        bounds[i] = rhs
    return HalfspacePolytope(rows, bounds)


def _suffix_ops(H: HalfspacePolytope, in_shape: tuple) -> OperationGraph:
    b = GraphBuilder()
    x = b.input(in_shape)
    hidden = b.op("Gemm", [x, TensorValue(H.A), TensorValue(-H.b)])
    act = b.op("Relu", [hidden])
    k = H.rows
    w = np.vstack([np.ones(k), np.zeros(k)])
    out = b.op("Gemm", [act, TensorValue(w), TensorValue(np.zeros(2))])
    return b.build([out])


def construct_suffix(H: HalfspacePolytope) -> OperationGraph:
    """Two fully connected layers classifying membership in ``H``.

    For y in R^m the suffix s satisfies: y in H iff s(y)[0] <= s(y)[1].
    Each hidden unit is relu(row . y - bound): exactly zero when its row
    holds, positive otherwise; the first output sums the units and the
    second is constantly zero.
    """
    if H.rows == 0:
        raise EmptyPolytope("a suffix needs at least one polytope row")
    return _suffix_ops(H, (H.dim,))


def _always_in_suffix(out_shape: tuple) -> OperationGraph:
    """Degenerate suffix for a disjunct with no output atoms: always 'in'."""
    m = int(np.prod(out_shape)) if out_shape else 1
    b = GraphBuilder()
    x = b.input(out_shape)
    hidden = b.op("Gemm", [x, TensorValue(np.zeros((1, m))), TensorValue(np.zeros(1))])
    act = b.op("Relu", [hidden])
    out = b.op("Gemm", [act, TensorValue(np.array([[1.0], [0.0]])), TensorValue(np.zeros(2))])
    return b.build([out])


def _attach_suffix(graph: OperationGraph, H_out: Optional[HalfspacePolytope]) -> OperationGraph:
    out_shape = tuple(graph.output_shapes[0])
    if len(out_shape) > 2:
        # flatten high-rank outputs so the suffix sees one feature axis
        from .ir import Operation

        ops = list(graph.operations)
        fid = graph.max_id() + 1
        ops.append(Operation(fid, "Flatten", (graph.outputs[0],), {"axis": 1}))
        graph = OperationGraph(ops, graph.inputs, (fid,))
        out_shape = tuple(graph.output_shapes[0])
    if H_out is None:
        suffix = _always_in_suffix(out_shape)
    else:
        suffix = _suffix_ops(H_out, out_shape)
    return chain_graphs(graph, suffix)


# --------------------------------------------------------------------------
# the reduction itself
# --------------------------------------------------------------------------


def reduce(graph: OperationGraph, prop: Forall) -> list:
    """Reduce (network, canonical property) to canonical reachability problems.

    Each returned problem pairs a suffixed copy of ``graph`` with an input
    polytope; the original property is valid iff no problem has a
    violation. ``prop`` must already be bound and canonicalized.
    """
    if len(graph.inputs) != 1 or len(graph.outputs) != 1:
        raise UnboundedInput("reduction handles single-input single-output networks")
    in_shape = tuple(graph.input_shapes[0])
    n = int(np.prod(in_shape)) if in_shape else 1
    out_shape = tuple(graph.output_shapes[0])
    m = int(np.prod(out_shape)) if out_shape else 1
    problems = []
    for i, disjunct in enumerate(negate_and_dnf(prop.body)):
        in_atoms = [a for a in disjunct if a.space == "input"]
        out_atoms = [a for a in disjunct if a.space == "output"]
        H_in = disjunct_to_hpolytope(in_atoms, dim=n)
        H_out = disjunct_to_hpolytope(out_atoms, dim=m) if out_atoms else None
        network = _attach_suffix(graph, H_out)
        problems.append(
            ReducedProblem(
                network=network,
                input_polytope=H_in,
                input_shape=in_shape,
                disjunct_index=i,
                atoms=tuple(disjunct),
            )
        )
    return problems


def map_counterexample(rp: ReducedProblem, x) -> TensorValue:
    """Map a reduced-problem violation back to the original input space.

    The suffix only extends the network, so the witness is unchanged; the
    preconditions (inside the input polytope, suffixed outputs violating)
    are checked and NotAViolation raised otherwise. Callers still
    re-validate against the original property.
    """
    flat = np.asarray(x, dtype=np.float64).reshape(-1)
    if flat.size != rp.input_dim:
        raise NotAViolation(f"witness has {flat.size} components, problem expects {rp.input_dim}")
    if not bool(rp.input_polytope.contains(flat)):
        raise NotAViolation("witness is outside the problem's input polytope")
    if not rp.violated_at(flat):
        raise NotAViolation("witness does not violate the reduced problem")
    return TensorValue(flat.reshape(rp.input_shape))


# --------------------------------------------------------------------------
# bounding boxes
# --------------------------------------------------------------------------


def bounding_box(H: HalfspacePolytope, dim: Optional[int] = None):
    """Finite per-dimension bounds [lo, hi] enclosing the polytope.

    Axis-aligned rows are combined exactly; any dimension they leave open
    is bounded with an LP over the full row set. Returns None when the
    axis-aligned rows alone prove the region empty. Raises UnboundedInput
    if a dimension has no finite bound.
    """
    d = H.dim if H.rows else (dim if dim is not None else H.dim)
    lo = np.full(d, -np.inf)
    hi = np.full(d, np.inf)
    general = []
    for row, bound in zip(H.A, H.b):
        nz = np.nonzero(row)[0]
        if nz.size == 1:
            j = nz[0]
            a = row[j]
            if a > 0:
                hi[j] = min(hi[j], bound / a)
            else:
                lo[j] = max(lo[j], bound / a)
        elif nz.size > 1:
            general.append(True)
    if np.any(lo > hi):
        return None
    open_dims = [j for j in range(d) if not np.isfinite(lo[j]) or not np.isfinite(hi[j])]
    if open_dims and not general:
        raise UnboundedInput(f"input dimension {open_dims[0]} has no finite bound")
    if open_dims:
        from scipy.optimize import linprog

        bounds_arg = [
            (None if not np.isfinite(lo[j]) else lo[j], None if not np.isfinite(hi[j]) else hi[j])
            for j in range(d)
        ]
        for j in open_dims:
            for sign, target in ((1.0, "lo"), (-1.0, "hi")):
                c = np.zeros(d)
                c[j] = sign
                res = linprog(c, A_ub=H.A, b_ub=H.b, bounds=bounds_arg, method="highs")
                if res.status == 3:
                    raise UnboundedInput(f"input dimension {j} has no finite bound")
                if res.status != 0:
                    raise UnboundedInput(
                        f"cannot bound input dimension {j} (LP status {res.status}: {res.message})"
                    )
                if target == "lo":
                    lo[j] = res.fun
                else:
                    hi[j] = -res.fun
    return lo, hi
