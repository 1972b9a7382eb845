"""Reference executor for operation graphs.

All arithmetic is float64. ``infer`` is a pure function of the graph and
its inputs; it is the oracle the rest of the package (simplification
checks, counterexample validation, format round-trips) is tested against.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeMismatch, UnsupportedKind
from .ir import Operation, OperationGraph, TensorValue, topological_order

__all__ = ["infer", "infer_many"]


def _conv2d(x, w, b, strides, pads):
    kh, kw = w.shape[2], w.shape[3]
    pt, pl, pb, pr = pads
    sh, sw = strides
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw, :, :]
    out = np.einsum("nchwij,mcij->nmhw", win, w, optimize=True)
    return out + b[None, :, None, None]


def _pool2d(x, kind, kernel, strides, pads):
    kh, kw = kernel
    pt, pl, pb, pr = pads
    sh, sw = strides
    if kind == "MaxPool":
        fill = -np.inf
    else:
        fill = 0.0
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)), constant_values=fill)
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw, :, :]
    if kind == "MaxPool":
        return win.max(axis=(-2, -1))
    # average over valid (non padding) cells only
    ones = np.ones(x.shape[2:], dtype=np.float64)
    op_ = np.pad(ones, ((pt, pb), (pl, pr)))
    cnt = sliding_window_view(op_, (kh, kw))[::sh, ::sw, :, :].sum(axis=(-2, -1))
    return win.sum(axis=(-2, -1)) / cnt[None, None, :, :]


def _eval(op: Operation, vals: list, batched: bool):
    """Evaluate one operation. ``batched`` marks an extra leading axis."""
    k = op.kind
    if batched and k not in _FC_BATCHABLE:
        raise UnsupportedKind(f"kind {k!r} is not batch transparent")
    if k == "Gemm":
        x, w, b = vals
        return x @ w.T + b
    if k == "MatMul":
        return vals[0] @ vals[1]
    if k == "Add":
        return vals[0] + vals[1]
    if k == "Sub":
        return vals[0] - vals[1]
    if k == "Mul":
        return vals[0] * vals[1]
    if k == "Div":
        return vals[0] / vals[1]
    if k == "Relu":
        return np.maximum(vals[0], 0.0)
    if k == "Sigmoid":
        return 1.0 / (1.0 + np.exp(-vals[0]))
    if k == "Tanh":
        return np.tanh(vals[0])
    if k == "Identity":
        return vals[0]
    if k == "Conv":
        return _conv2d(vals[0], vals[1], vals[2], op.attrs["strides"], op.attrs["pads"])
    if k in ("MaxPool", "AveragePool"):
        return _pool2d(vals[0], k, op.attrs["kernel_shape"], op.attrs["strides"], op.attrs["pads"])
    if k == "BatchNormalization":
        x, gamma, beta, mean, var = vals
        bshape = (1, -1) + (1,) * (x.ndim - 2)
        scale = gamma / np.sqrt(var + op.attrs["epsilon"])
        return x * scale.reshape(bshape) + (beta - mean * scale).reshape(bshape)
    if k == "Flatten":
        axis = op.attrs["axis"]
        lead = int(np.prod(vals[0].shape[:axis])) if axis else 1
        rest = int(np.prod(vals[0].shape[axis:])) if axis < vals[0].ndim else 1
        return vals[0].reshape(lead, rest)
    if k == "Reshape":
        from .ir import _resolve_reshape

        return vals[0].reshape(_resolve_reshape(vals[0].shape, op.attrs["shape"]))
    if k == "Transpose":
        return vals[0].transpose(op.attrs["perm"])
    if k == "Concat":
        return np.concatenate(vals, axis=op.attrs["axis"])
    if k == "Pad":
        pads = op.attrs["pads"]
        r = len(pads) // 2
        width = [(pads[i], pads[r + i]) for i in range(r)]
        return np.pad(vals[0], width, constant_values=float(op.attrs["value"]))
    raise UnsupportedKind(f"executor has no rule for kind {op.kind!r}")


def _as_array(x) -> np.ndarray:
    if isinstance(x, TensorValue):
        return x.data
    return np.asarray(x, dtype=np.float64)


def infer(graph: OperationGraph, inputs: Sequence) -> list:
    """Run the graph on concrete inputs and return its output tensors.

    ``inputs`` pair up with ``graph.inputs`` in order; each may be a
    TensorValue or anything numpy can coerce. Shapes must match the
    declared graph-input shapes exactly.
    """
    if len(inputs) != len(graph.inputs):
        raise ShapeMismatch(f"graph takes {len(graph.inputs)} inputs, got {len(inputs)}")
    values: dict[int, np.ndarray] = {}
    for oid, given in zip(graph.inputs, inputs):
        arr = _as_array(given)
        want = graph.shape_of(oid)
        if tuple(arr.shape) != tuple(want):
            raise ShapeMismatch(f"input {oid} expects shape {want}, got {tuple(arr.shape)}")
        values[oid] = arr
    for oid in topological_order(graph):
        op = graph.by_id[oid]
        if op.kind == "Input":
            assert oid in values, "executor read an unwritten input"
            continue
        vals = []
        for slot in op.inputs:
            if isinstance(slot, int):
                assert slot in values, "executor read an unwritten value"
                vals.append(values[slot])
            else:
                vals.append(slot.data)
        values[oid] = _eval(op, vals, batched=False)
    return [TensorValue(values[o]) for o in graph.outputs]


# kinds whose numpy implementation is transparent to an extra leading batch
# axis when the declared graph inputs are rank-1 vectors
_FC_BATCHABLE = frozenset(
    {"Input", "Gemm", "MatMul", "Add", "Sub", "Mul", "Div", "Relu", "Sigmoid", "Tanh", "Identity"}
)


def _fc_batchable(graph: OperationGraph) -> bool:
    if any(len(s) != 1 for s in graph.input_shapes):
        return False
    for op in graph.operations:
        if op.kind not in _FC_BATCHABLE:
            return False
        if op.kind in ("Gemm", "MatMul") and not isinstance(op.inputs[0], int):
            return False
        if op.kind in ("Add", "Sub", "Mul", "Div"):
            for slot in op.inputs:
                if isinstance(slot, TensorValue) and len(slot.shape) > 1:
                    return False
    return True


def infer_many(graph: OperationGraph, batches: Sequence[np.ndarray]) -> list:
    """Vectorized ``infer`` over a leading sample axis.

    ``batches`` holds one array per graph input shaped ``[B] + declared``.
    Fully-connected graphs evaluate in one pass; anything else falls back
    to a per-sample loop. The fast path agrees with per-sample ``infer``
    to the last few ulps (BLAS picks different kernels for matrix-matrix
    and matrix-vector products), not necessarily bit for bit.
    """
    arrays = [np.asarray(b, dtype=np.float64) for b in batches]
    if not arrays:
        raise ShapeMismatch("infer_many needs at least one input batch")
    bsz = arrays[0].shape[0]
    for arr, want in zip(arrays, graph.input_shapes):
        if arr.shape[0] != bsz or tuple(arr.shape[1:]) != tuple(want):
            raise ShapeMismatch(f"batch shaped {arr.shape} does not extend declared {want}")
    if _fc_batchable(graph):
        values: dict[int, np.ndarray] = dict(zip(graph.inputs, arrays))
        for oid in topological_order(graph):
            op = graph.by_id[oid]
            if op.kind == "Input":
                continue
            vals = [values[s] if isinstance(s, int) else s.data for s in op.inputs]
            values[oid] = _eval(op, vals, batched=True)
        return [values[o] for o in graph.outputs]
    outs = [[] for _ in graph.outputs]
    for i in range(bsz):
        res = infer(graph, [arr[i] for arr in arrays])
        for j, t in enumerate(res):
            outs[j].append(t.data)
    return [np.stack(col) if col else np.empty((0,)) for col in outs]
