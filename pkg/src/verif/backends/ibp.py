"""Interval bound propagation: a sound, incomplete built-in verifier.

Bounds flow through the suffixed network from the input region's bounding
box. Affine operations split weights by sign (exact interval arithmetic);
monotone activations and pools apply endpoint-wise; shape operations move
both endpoints. If the first output's lower bound exceeds the second's
upper bound, no violation exists anywhere in the box: unsat. Anything
else is unknown.
"""

from __future__ import annotations

import time

import numpy as np

from ..errors import UnsupportedKind
from ..execute import _conv2d, _pool2d
from ..ir import OperationGraph, TensorValue, topological_order
from ..reduce import ReducedProblem, bounding_box
from .outcome import VerifierOutcome

__all__ = ["ibp_verify", "interval_bounds"]


class _Deadline(Exception):
    pass


def _affine_split(lo, hi, w_pos, w_neg, matmul):
    return (
        matmul(lo, w_pos) + matmul(hi, w_neg),
        matmul(hi, w_pos) + matmul(lo, w_neg),
    )


def _interval_eval(op, vals):
    k = op.kind
    if k == "Gemm":
        (xl, xh), (w, _), (b, _) = vals
        wp, wn = np.maximum(w, 0.0), np.minimum(w, 0.0)
        lo, hi = _affine_split(xl, xh, wp, wn, lambda v, m: v @ m.T)
        return lo + b, hi + b
    if k == "MatMul":
        (al, ah), (bl, bh) = vals
        a_const = al is ah
        b_const = bl is bh
        if b_const and not a_const:
            wp, wn = np.maximum(bl, 0.0), np.minimum(bl, 0.0)
            return _affine_split(al, ah, wp, wn, lambda v, m: v @ m)
        if a_const and not b_const:
            wp, wn = np.maximum(al, 0.0), np.minimum(al, 0.0)
            return _affine_split(bl, bh, wp, wn, lambda v, m: m @ v)
        if a_const and b_const:
            r = al @ bl
            return r, r
        raise UnsupportedKind("interval MatMul needs one constant operand")
    if k == "Add":
        (al, ah), (bl, bh) = vals
        return al + bl, ah + bh
    if k == "Sub":
        (al, ah), (bl, bh) = vals
        return al - bh, ah - bl
    if k == "Mul":
        (al, ah), (bl, bh) = vals
        cands = np.stack(np.broadcast_arrays(al * bl, al * bh, ah * bl, ah * bh))
        return cands.min(axis=0), cands.max(axis=0)
    if k == "Div":
        (al, ah), (bl, bh) = vals
        bl_b, bh_b = np.broadcast_arrays(bl, bh)
        spans_zero = (bl_b <= 0.0) & (bh_b >= 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            cands = np.stack(np.broadcast_arrays(al / bl, al / bh, ah / bl, ah / bh))
        lo, hi = cands.min(axis=0), cands.max(axis=0)
        lo = np.where(spans_zero, -np.inf, lo)
        hi = np.where(spans_zero, np.inf, hi)
        return lo, hi
    if k == "Conv":
        (xl, xh), (w, _), (b, _) = vals
        wp, wn = np.maximum(w, 0.0), np.minimum(w, 0.0)
        zero = np.zeros(w.shape[0])
        s, p = op.attrs["strides"], op.attrs["pads"]
        lo = _conv2d(xl, wp, zero, s, p) + _conv2d(xh, wn, zero, s, p)
        hi = _conv2d(xh, wp, zero, s, p) + _conv2d(xl, wn, zero, s, p)
        bb = b[None, :, None, None]
        return lo + bb, hi + bb
    if k == "BatchNormalization":
        (xl, xh), (g, _), (bt, _), (mu, _), (var, _) = vals
        s = g / np.sqrt(var + op.attrs["epsilon"])
        shift = bt - mu * s
        bshape = (1, -1) + (1,) * (xl.ndim - 2)
        s = s.reshape(bshape)
        shift = shift.reshape(bshape)
        lo = np.minimum(xl * s, xh * s) + shift
        hi = np.maximum(xl * s, xh * s) + shift
        return lo, hi
    if k == "Relu":
        (xl, xh), = vals
        return np.maximum(xl, 0.0), np.maximum(xh, 0.0)
    if k == "Sigmoid":
        (xl, xh), = vals
        return 1.0 / (1.0 + np.exp(-xl)), 1.0 / (1.0 + np.exp(-xh))
    if k == "Tanh":
        (xl, xh), = vals
        return np.tanh(xl), np.tanh(xh)
    if k == "Identity":
        return vals[0]
    if k in ("MaxPool", "AveragePool"):
        (xl, xh), = vals
        a = op.attrs
        lo = _pool2d(xl, k, a["kernel_shape"], a["strides"], a["pads"])
        hi = _pool2d(xh, k, a["kernel_shape"], a["strides"], a["pads"])
        return lo, hi
    if k == "Flatten":
        (xl, xh), = vals
        axis = op.attrs["axis"]
        lead = int(np.prod(xl.shape[:axis])) if axis else 1
        rest = int(np.prod(xl.shape[axis:])) if axis < xl.ndim else 1
        return xl.reshape(lead, rest), xh.reshape(lead, rest)
    if k == "Reshape":
        from ..ir import _resolve_reshape

        (xl, xh), = vals
        target = _resolve_reshape(xl.shape, op.attrs["shape"])
        return xl.reshape(target), xh.reshape(target)
    if k == "Transpose":
        (xl, xh), = vals
        return xl.transpose(op.attrs["perm"]), xh.transpose(op.attrs["perm"])
    if k == "Concat":
        axis = op.attrs["axis"]
        return (
            np.concatenate([v[0] for v in vals], axis=axis),
            np.concatenate([v[1] for v in vals], axis=axis),
        )
    if k == "Pad":
        (xl, xh), = vals
        pads = op.attrs["pads"]
        r = len(pads) // 2
        width = [(pads[i], pads[r + i]) for i in range(r)]
        v = float(op.attrs["value"])
        return np.pad(xl, width, constant_values=v), np.pad(xh, width, constant_values=v)
    raise UnsupportedKind(f"no interval rule for kind {k!r}")


def interval_bounds(graph: OperationGraph, lo: np.ndarray, hi: np.ndarray, deadline=None):
    """Propagate [lo, hi] on the single graph input to output bounds."""
    intervals = {graph.inputs[0]: (np.asarray(lo, dtype=np.float64), np.asarray(hi, dtype=np.float64))}
    for oid in topological_order(graph):
        if deadline is not None and time.monotonic() > deadline:
            raise _Deadline()
        op = graph.by_id[oid]
        if op.kind == "Input":
            continue
        vals = []
        for slot in op.inputs:
            if isinstance(slot, TensorValue):
                vals.append((slot.data, slot.data))  # degenerate interval, shared object
            else:
                vals.append(intervals[slot])
        intervals[oid] = _interval_eval(op, vals)
    return [intervals[o] for o in graph.outputs]


def ibp_verify(rp: ReducedProblem, timeout: float = 0.0) -> VerifierOutcome:
    """Try to prove a reduced problem has no violation inside its box."""
    t0 = time.monotonic()
    deadline = t0 + timeout if timeout else None
    box = bounding_box(rp.input_polytope, rp.input_dim)
    if box is None:
        # axis-aligned rows alone prove the input region empty
        return VerifierOutcome("unsat", verification_time=time.monotonic() - t0)
    lo, hi = (v.reshape(rp.input_shape) for v in box)
    try:
        (out_lo, out_hi), = interval_bounds(rp.network, lo, hi, deadline)
    except _Deadline:
        return VerifierOutcome("unknown", verification_time=time.monotonic() - t0)
    flat_lo = out_lo.reshape(-1)
    flat_hi = out_hi.reshape(-1)
    status = "unsat" if flat_lo[0] > flat_hi[1] else "unknown"
    return VerifierOutcome(status, verification_time=time.monotonic() - t0)
