"""Operation-graph intermediate representation for feed-forward networks.

A network is a DAG of tensor operations. Nodes carry their constant
parameters (weights, biases, normalization statistics) inline as
:class:`TensorValue` slots, so an edge always denotes a data dependency
on another operation's output. Graphs are immutable after construction;
rewrites build new graphs with fresh ids.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence, Union

import numpy as np

from .errors import CycleDetected, InvalidGraph, ShapeMismatch, UnsupportedKind

__all__ = [
    "TensorValue",
    "Operation",
    "OperationGraph",
    "GraphBuilder",
    "topological_order",
    "match_pattern",
    "chain_graphs",
    "structurally_equal",
    "SUPPORTED_KINDS",
]


class TensorValue:
    """A constant tensor: declared dtype, shape, and a row-major buffer.

    The buffer is always held as float64 (float32 sources widen exactly on
    load; the declared dtype is kept for serialization). The array is
    marked read-only so shared graphs stay immutable.
    """

    __slots__ = ("dtype", "data")

    def __init__(self, data, dtype: str = "float64"):
        if dtype not in ("float32", "float64"):
            raise ValueError(f"unsupported tensor dtype {dtype!r}")
        arr = np.array(data, dtype=np.float64, order="C")
        if dtype == "float32":
            # keep the tag truthful: float32-declared values must be
            # float32-representable so serialization is lossless
            arr = arr.astype(np.float32).astype(np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "dtype", dtype)
        object.__setattr__(self, "data", arr)

    def __setattr__(self, name, value):
        raise AttributeError("TensorValue is immutable")

    @property
    def shape(self) -> tuple:
        return tuple(self.data.shape)

    @property
    def size(self) -> int:
        return self.data.size

    def __eq__(self, other):
        if not isinstance(other, TensorValue):
            return NotImplemented
        return (
            self.dtype == other.dtype
            and self.shape == other.shape
            and np.array_equal(self.data, other.data)
        )

    def __hash__(self):
        return hash((self.dtype, self.shape, self.data.tobytes()))

    def __repr__(self):
        return f"TensorValue(shape={list(self.shape)}, dtype={self.dtype})"


Slot = Union[int, TensorValue]  # producer id, or an inline constant


# Extension point: a new operation kind needs an entry here, an arity and
# attribute schema in _SCHEMA below, a rule in op_output_shape, and an
# evaluation rule in execute._eval (plus execute's interval rule and the
# model-format mapping in onnx_io if it should flow through those layers).
SUPPORTED_KINDS = frozenset(
    {
        "Input",
        "Gemm",
        "MatMul",
        "Add",
        "Sub",
        "Mul",
        "Div",
        "Conv",
        "BatchNormalization",
        "Relu",
        "Sigmoid",
        "Tanh",
        "MaxPool",
        "AveragePool",
        "Flatten",
        "Reshape",
        "Transpose",
        "Concat",
        "Pad",
        "Identity",
    }
)

# kind -> (min arity, max arity or None for variadic, exact attribute-key set)
_SCHEMA: dict[str, tuple[int, int | None, frozenset]] = {
    "Input": (0, 0, frozenset({"shape", "dtype"})),
    "Gemm": (3, 3, frozenset()),
    "MatMul": (2, 2, frozenset()),
    "Add": (2, 2, frozenset()),
    "Sub": (2, 2, frozenset()),
    "Mul": (2, 2, frozenset()),
    "Div": (2, 2, frozenset()),
    "Conv": (3, 3, frozenset({"kernel_shape", "strides", "pads"})),
    "BatchNormalization": (5, 5, frozenset({"epsilon"})),
    "Relu": (1, 1, frozenset()),
    "Sigmoid": (1, 1, frozenset()),
    "Tanh": (1, 1, frozenset()),
    "MaxPool": (1, 1, frozenset({"kernel_shape", "strides", "pads"})),
    "AveragePool": (1, 1, frozenset({"kernel_shape", "strides", "pads"})),
    "Flatten": (1, 1, frozenset({"axis"})),
    "Reshape": (1, 1, frozenset({"shape"})),
    "Transpose": (1, 1, frozenset({"perm"})),
    "Concat": (1, None, frozenset({"axis"})),
    "Pad": (1, 1, frozenset({"pads", "value"})),
    "Identity": (1, 1, frozenset()),
}

# slots that must hold constants (by position), e.g. weights and biases
_CONST_SLOTS: dict[str, tuple[int, ...]] = {
    "Gemm": (1, 2),
    "Conv": (1, 2),
    "BatchNormalization": (1, 2, 3, 4),
}


@dataclass(frozen=True)
class Operation:
    """One graph node: a kind, its input slots, and kind-specific attributes."""

    id: int
    kind: str
    inputs: tuple
    attrs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SUPPORTED_KINDS:
            raise UnsupportedKind(f"unknown operation kind {self.kind!r}")
        lo, hi, attr_keys = _SCHEMA[self.kind]
        n = len(self.inputs)
        if n < lo or (hi is not None and n > hi):
            raise InvalidGraph(f"{self.kind} (id {self.id}) takes {lo}..{hi} inputs, got {n}")
        if set(self.attrs) != set(attr_keys):
            raise InvalidGraph(
                f"{self.kind} (id {self.id}) attributes must be exactly "
                f"{sorted(attr_keys)}, got {sorted(self.attrs)}"
            )
        for pos in _CONST_SLOTS.get(self.kind, ()):
            if not isinstance(self.inputs[pos], TensorValue):
                raise InvalidGraph(f"{self.kind} (id {self.id}) slot {pos} must be a constant tensor")
        for pos, slot in enumerate(self.inputs):
            if not isinstance(slot, (int, TensorValue)) or isinstance(slot, bool):
                raise InvalidGraph(f"operation {self.id} slot {pos} is neither an id nor a constant")

    def producer_ids(self) -> tuple:
        return tuple(s for s in self.inputs if isinstance(s, int))

    def constants(self) -> tuple:
        return tuple(s for s in self.inputs if isinstance(s, TensorValue))


def _resolve_reshape(shape, target):
    total = int(np.prod(shape)) if shape else 1
    out = []
    infer_at = None
    for i, d in enumerate(target):
        if d == 0:
            if i >= len(shape):
                raise ShapeMismatch(f"reshape dim 0 at axis {i} has no source dim in {shape}")
            out.append(shape[i])
        elif d == -1:
            if infer_at is not None:
                raise ShapeMismatch("reshape target has more than one -1")
            infer_at = i
            out.append(1)
        elif d > 0:
            out.append(int(d))
        else:
            raise ShapeMismatch(f"invalid reshape dim {d}")
    prod = int(np.prod(out)) if out else 1
    if infer_at is not None:
        if prod == 0 or total % prod != 0:
            raise ShapeMismatch(f"cannot infer -1 reshaping {shape} to {target}")
        out[infer_at] = total // prod
        prod = total
    if prod != total:
        raise ShapeMismatch(f"reshape {shape} -> {target} changes element count")
    return tuple(out)


def _pool_spatial(size, k, pad_begin, pad_end, stride):
    span = size + pad_begin + pad_end - k
    if span < 0:
        raise ShapeMismatch(f"window {k} larger than padded extent {size + pad_begin + pad_end}")
    return span // stride + 1


def op_output_shape(op: Operation, in_shapes: Sequence[tuple]) -> tuple:
    """Static shape rule for each supported kind."""
    k = op.kind
    if k == "Input":
        return tuple(op.attrs["shape"])
    if k == "Gemm":
        x, w, b = in_shapes
        if len(w) != 2 or len(b) != 1 or b[0] != w[0]:
            raise ShapeMismatch(f"Gemm (id {op.id}) expects W [m,n] and b [m], got {w}, {b}")
        m, n = w
        if len(x) == 1 and x[0] == n:
            return (m,)
        if len(x) == 2 and x[1] == n:
            return (x[0], m)
        raise ShapeMismatch(f"Gemm (id {op.id}) input {x} incompatible with W {w}")
    if k == "MatMul":
        a, b = in_shapes
        if len(a) == 1 and len(b) == 1:
            if a[0] != b[0]:
                raise ShapeMismatch(f"MatMul (id {op.id}) {a} @ {b}")
            return ()
        if len(a) == 1 and len(b) == 2:
            if a[0] != b[0]:
                raise ShapeMismatch(f"MatMul (id {op.id}) {a} @ {b}")
            return (b[1],)
        if len(a) == 2 and len(b) == 1:
            if a[1] != b[0]:
                raise ShapeMismatch(f"MatMul (id {op.id}) {a} @ {b}")
            return (a[0],)
        if len(a) == 2 and len(b) == 2:
            if a[1] != b[0]:
                raise ShapeMismatch(f"MatMul (id {op.id}) {a} @ {b}")
            return (a[0], b[1])
        raise UnsupportedKind(f"MatMul (id {op.id}) supports rank <= 2 operands, got {a}, {b}")
    if k in ("Add", "Sub", "Mul", "Div"):
        try:
            return tuple(np.broadcast_shapes(*in_shapes))
        except ValueError as e:
            raise ShapeMismatch(f"{k} (id {op.id}): {e}") from None
    if k == "Conv":
        x, w, b = in_shapes
        if len(x) != 4 or len(w) != 4:
            raise UnsupportedKind(f"Conv (id {op.id}) supports 2-D convolution on NCHW input")
        if x[1] != w[1] or (len(b) != 1 or b[0] != w[0]):
            raise ShapeMismatch(f"Conv (id {op.id}) x {x}, W {w}, b {b} inconsistent")
        kh, kw = op.attrs["kernel_shape"]
        if (kh, kw) != (w[2], w[3]):
            raise ShapeMismatch(f"Conv (id {op.id}) kernel_shape {op.attrs['kernel_shape']} != W {w}")
        sh, sw = op.attrs["strides"]
        pt, pl, pb, pr = op.attrs["pads"]
        return (
            x[0],
            w[0],
            _pool_spatial(x[2], kh, pt, pb, sh),
            _pool_spatial(x[3], kw, pl, pr, sw),
        )
    if k == "BatchNormalization":
        x = in_shapes[0]
        if len(x) < 2:
            raise ShapeMismatch(f"BatchNormalization (id {op.id}) needs rank >= 2 input, got {x}")
        c = x[1]
        for s in in_shapes[1:]:
            if s != (c,):
                raise ShapeMismatch(f"BatchNormalization (id {op.id}) parameter shape {s} != ({c},)")
        return x
    if k in ("Relu", "Sigmoid", "Tanh", "Identity"):
        return in_shapes[0]
    if k in ("MaxPool", "AveragePool"):
        x = in_shapes[0]
        if len(x) != 4:
            raise UnsupportedKind(f"{k} (id {op.id}) supports NCHW input only")
        kh, kw = op.attrs["kernel_shape"]
        sh, sw = op.attrs["strides"]
        pt, pl, pb, pr = op.attrs["pads"]
        return (x[0], x[1], _pool_spatial(x[2], kh, pt, pb, sh), _pool_spatial(x[3], kw, pl, pr, sw))
    if k == "Flatten":
        x = in_shapes[0]
        a = op.attrs["axis"]
        if a < 0 or a > len(x):
            raise ShapeMismatch(f"Flatten (id {op.id}) axis {a} out of range for {x}")
        return (int(np.prod(x[:a])) if a else 1, int(np.prod(x[a:])) if a < len(x) else 1)
    if k == "Reshape":
        return _resolve_reshape(in_shapes[0], op.attrs["shape"])
    if k == "Transpose":
        x = in_shapes[0]
        perm = op.attrs["perm"]
        if sorted(perm) != list(range(len(x))):
            raise ShapeMismatch(f"Transpose (id {op.id}) perm {perm} invalid for rank {len(x)}")
        return tuple(x[p] for p in perm)
    if k == "Concat":
        axis = op.attrs["axis"]
        first = in_shapes[0]
        if axis < 0 or axis >= len(first):
            raise ShapeMismatch(f"Concat (id {op.id}) axis {axis} out of range for {first}")
        total = 0
        for s in in_shapes:
            if len(s) != len(first) or any(s[i] != first[i] for i in range(len(first)) if i != axis):
                raise ShapeMismatch(f"Concat (id {op.id}) mismatched input shapes {in_shapes}")
            total += s[axis]
        return first[:axis] + (total,) + first[axis + 1 :]
    if k == "Pad":
        x = in_shapes[0]
        pads = op.attrs["pads"]
        r = len(x)
        if len(pads) != 2 * r:
            raise ShapeMismatch(f"Pad (id {op.id}) needs {2 * r} pad amounts, got {len(pads)}")
        if any(p < 0 for p in pads):
            raise UnsupportedKind(f"Pad (id {op.id}) negative pads not supported")
        return tuple(x[i] + pads[i] + pads[r + i] for i in range(r))
    raise UnsupportedKind(f"no shape rule for kind {k!r}")


class OperationGraph:
    """Immutable DAG of operations with declared inputs and outputs.

    Construction validates all structural invariants: unique ids, filled
    slots, existing endpoints, acyclicity, Input-kind graph inputs, and
    per-node shape consistency.
    """

    def __init__(self, operations: Sequence[Operation], inputs: Sequence[int], outputs: Sequence[int]):
        self.operations = tuple(operations)
        self.inputs = tuple(inputs)
        self.outputs = tuple(outputs)
        self.by_id: dict[int, Operation] = {}
        for op in self.operations:
            if op.id in self.by_id:
                raise InvalidGraph(f"duplicate operation id {op.id}")
            self.by_id[op.id] = op
        for op in self.operations:
            for pid in op.producer_ids():
                if pid not in self.by_id:
                    raise InvalidGraph(f"operation {op.id} references missing producer {pid}")
        for oid in self.outputs:
            if oid not in self.by_id:
                raise InvalidGraph(f"graph output references missing operation {oid}")
        input_kind_ids = {op.id for op in self.operations if op.kind == "Input"}
        if set(self.inputs) != input_kind_ids:
            raise InvalidGraph("graph inputs must list exactly the Input-kind operations")
        if len(set(self.inputs)) != len(self.inputs):
            raise InvalidGraph("duplicate graph input")
        # consumers: producer id -> [(consumer id, slot index)]
        self._consumers: dict[int, list] = {op.id: [] for op in self.operations}
        for op in self.operations:
            for pos, slot in enumerate(op.inputs):
                if isinstance(slot, int):
                    self._consumers[slot].append((op.id, pos))
        self._topo = _toposort(self)
        self._shapes: dict[int, tuple] = {}
        for oid in self._topo:
            op = self.by_id[oid]
            in_shapes = [
                s.shape if isinstance(s, TensorValue) else self._shapes[s] for s in op.inputs
            ]
            self._shapes[oid] = op_output_shape(op, in_shapes)

    # -- queries ---------------------------------------------------------

    def consumers(self, op_id: int) -> list:
        """Outgoing edges of ``op_id`` as (consumer id, slot index) pairs."""
        return list(self._consumers[op_id])

    def shape_of(self, op_id: int) -> tuple:
        return self._shapes[op_id]

    @property
    def input_shapes(self) -> list:
        return [self._shapes[i] for i in self.inputs]

    @property
    def output_shapes(self) -> list:
        return [self._shapes[o] for o in self.outputs]

    @property
    def input_dtypes(self) -> list:
        return [self.by_id[i].attrs["dtype"] for i in self.inputs]

    def max_id(self) -> int:
        return max(self.by_id) if self.by_id else -1

    def __len__(self):
        return len(self.operations)

    def __repr__(self):
        kinds = ", ".join(op.kind for op in self.operations[:6])
        more = "..." if len(self.operations) > 6 else ""
        return f"OperationGraph({len(self.operations)} ops: {kinds}{more})"


def _toposort(graph: OperationGraph) -> list:
    indeg = {op.id: 0 for op in graph.operations}
    succ: dict[int, list] = {op.id: [] for op in graph.operations}
    for op in graph.operations:
        for pid in set(op.producer_ids()):
            succ[pid].append(op.id)
            indeg[op.id] += 1
    ready = [oid for oid, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        oid = heapq.heappop(ready)
        order.append(oid)
        for nxt in succ[oid]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                heapq.heappush(ready, nxt)
    if len(order) != len(graph.operations):
        raise CycleDetected("operation graph contains a cycle")
    return order


def topological_order(graph: OperationGraph) -> list:
    """Operation ids, producers before consumers, ties by ascending id."""
    return list(graph._topo)


def match_pattern(graph: OperationGraph, pattern: Sequence) -> list:
    """Find chains of operations whose kinds satisfy ``pattern`` in order.

    Each pattern element is a kind name, an iterable of kind names, or a
    predicate over :class:`Operation`. Interior nodes of a match must have
    the next node as their sole consumer and must not be graph outputs, so
    a rewrite of the chain cannot change observable behavior.
    """
    preds: list[Callable[[Operation], bool]] = []
    for p in pattern:
        if callable(p):
            preds.append(p)
        elif isinstance(p, str):
            preds.append(lambda op, _k=p: op.kind == _k)
        else:
            kinds = frozenset(p)
            preds.append(lambda op, _ks=kinds: op.kind in _ks)
    if not preds:
        return []
    sites = []
    out_ids = set(graph.outputs)
    for start in topological_order(graph):
        op = graph.by_id[start]
        if not preds[0](op):
            continue
        chain = [start]
        ok = True
        for nxt_pred in preds[1:]:
            cur = chain[-1]
            edges = graph.consumers(cur)
            if len(edges) != 1 or cur in out_ids:
                ok = False
                break
            nxt = graph.by_id[edges[0][0]]
            if not nxt_pred(nxt):
                ok = False
                break
            chain.append(nxt.id)
        if ok:
            sites.append(tuple(chain))
    return sites


_ATTR_DEFAULTS: dict[str, dict] = {
    "Conv": {"strides": (1, 1), "pads": (0, 0, 0, 0)},
    "MaxPool": {"strides": (1, 1), "pads": (0, 0, 0, 0)},
    "AveragePool": {"strides": (1, 1), "pads": (0, 0, 0, 0)},
    "BatchNormalization": {"epsilon": 1e-5},
    "Flatten": {"axis": 1},
    "Pad": {"value": 0.0},
    "Input": {"dtype": "float64"},
}


def _normalize_attr(value):
    if isinstance(value, (list, np.ndarray)):
        return tuple(int(v) if float(v).is_integer() else float(v) for v in value)
    if isinstance(value, tuple):
        return tuple(int(v) if isinstance(v, (int, np.integer)) else float(v) for v in value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value


class GraphBuilder:
    """Incrementally assemble an :class:`OperationGraph`.

    Ids are dense and increase in insertion order; rewrites should seed
    ``first_id`` past the source graph's ids so fresh nodes never collide.
    """

    def __init__(self, first_id: int = 0):
        self._next = first_id
        self._ops: list[Operation] = []
        self._inputs: list[int] = []

    def _take_id(self) -> int:
        i = self._next
        self._next += 1
        return i

    def input(self, shape: Sequence[int], dtype: str = "float64") -> int:
        oid = self._take_id()
        self._ops.append(
            Operation(oid, "Input", (), {"shape": tuple(int(d) for d in shape), "dtype": dtype})
        )
        self._inputs.append(oid)
        return oid

    def op(self, kind: str, inputs: Sequence, **attrs) -> int:
        slots = []
        for s in inputs:
            if isinstance(s, TensorValue) or (isinstance(s, int) and not isinstance(s, bool)):
                slots.append(s)
            else:
                slots.append(TensorValue(np.asarray(s, dtype=np.float64)))
        merged = dict(_ATTR_DEFAULTS.get(kind, {}))
        merged.update(attrs)
        if kind == "Conv" and "kernel_shape" not in merged:
            merged["kernel_shape"] = tuple(slots[1].shape[2:])
        if kind == "Transpose" and "perm" not in merged:
            raise InvalidGraph("Transpose requires an explicit perm")
        merged = {k: _normalize_attr(v) for k, v in merged.items()}
        oid = self._take_id()
        self._ops.append(Operation(oid, kind, tuple(slots), merged))
        return oid

    def add_operation(self, op: Operation) -> int:
        """Append a fully-formed operation (id must be fresh)."""
        if op.id < self._next:
            raise InvalidGraph(f"operation id {op.id} reuses an already-allocated id")
        self._next = op.id + 1
        self._ops.append(op)
        if op.kind == "Input":
            self._inputs.append(op.id)
        return op.id

    def build(self, outputs: Sequence[int]) -> OperationGraph:
        return OperationGraph(self._ops, self._inputs, tuple(outputs))


def chain_graphs(first: OperationGraph, second: OperationGraph) -> OperationGraph:
    """Compose two graphs: the result computes ``second(first(x))``.

    ``first`` must have exactly one output and ``second`` exactly one
    input, with matching shapes.
    """
    if len(first.outputs) != 1:
        raise InvalidGraph("chain_graphs: first graph must have exactly one output")
    if len(second.inputs) != 1:
        raise InvalidGraph("chain_graphs: second graph must have exactly one input")
    out_shape = first.output_shapes[0]
    in_shape = second.input_shapes[0]
    if tuple(out_shape) != tuple(in_shape):
        raise ShapeMismatch(f"chain_graphs: output {out_shape} does not feed input {in_shape}")
    b = GraphBuilder()
    mapping: dict[int, int] = {}
    for oid in topological_order(first):
        op = first.by_id[oid]
        slots = tuple(mapping[s] if isinstance(s, int) else s for s in op.inputs)
        mapping[oid] = b.add_operation(Operation(b._next, op.kind, slots, dict(op.attrs)))
    joint = mapping[first.outputs[0]]
    second_map: dict[int, int] = {second.inputs[0]: joint}
    for oid in topological_order(second):
        op = second.by_id[oid]
        if op.kind == "Input":
            continue
        slots = tuple(second_map[s] if isinstance(s, int) else s for s in op.inputs)
        second_map[oid] = b.add_operation(Operation(b._next, op.kind, slots, dict(op.attrs)))
    return b.build([second_map[o] for o in second.outputs])


def structurally_equal(a: OperationGraph, b: OperationGraph) -> bool:
    """Equality up to id relabeling: same kinds, attrs, constants, wiring."""
    ta, tb = topological_order(a), topological_order(b)
    if len(ta) != len(tb) or len(a.outputs) != len(b.outputs) or len(a.inputs) != len(b.inputs):
        return False
    pos_a = {oid: i for i, oid in enumerate(ta)}
    pos_b = {oid: i for i, oid in enumerate(tb)}

    def canon(graph, order, pos):
        rows = []
        for oid in order:
            op = graph.by_id[oid]
            slots = tuple(
                ("ref", pos[s]) if isinstance(s, int) else ("const", s) for s in op.inputs
            )
            rows.append((op.kind, tuple(sorted(op.attrs.items())), slots))
        return rows

    if canon(a, ta, pos_a) != canon(b, tb, pos_b):
        return False
    return [pos_a[o] for o in a.outputs] == [pos_b[o] for o in b.outputs] and [
        pos_a[i] for i in a.inputs
    ] == [pos_b[i] for i in b.inputs]
