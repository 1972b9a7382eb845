"""Semantics-preserving graph rewrites.

Seven passes run in a fixed order to a fixpoint: identity removal,
MatMul+Add fusion, batch-norm folding, consecutive-Conv combination,
consecutive-Gemm combination, Pad bundling, and moving activations back
through reshaping operations. Every pass preserves network behavior
(checked against the reference executor in the test suite) and never
reuses operation ids.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ir import GraphBuilder, Operation, OperationGraph, TensorValue, match_pattern, topological_order

__all__ = [
    "SimplifyReport",
    "simplify",
    "remove_identities",
    "matmul_add_to_gemm",
    "fuse_batch_norm",
    "combine_consecutive_conv",
    "combine_consecutive_gemm",
    "bundle_pad",
    "move_activations_backward",
]


@dataclass
class SimplifyReport:
    """What the fixpoint loop did: per-pass firing counts and node counts."""

    passes: dict = field(default_factory=dict)
    before_nodes: int = 0
    after_nodes: int = 0
    sweeps: int = 0

    def total(self) -> int:
        return sum(self.passes.values())


# --------------------------------------------------------------------------
# rewrite plumbing
# --------------------------------------------------------------------------
#
# A pass produces a plan over old ids:
#   ('skip',)            the node vanishes; nothing may reference it afterwards
#   ('drop', slot)       consumers are rewired to `slot` (old id or constant)
#   ('new', kind, slots, attrs)   replacement node at this position; slots
#                                 reference old ids or constants
# _apply rebuilds the whole graph with fresh ids (never reusing old ones).


def _apply(graph: OperationGraph, plan: dict) -> OperationGraph:
    b = GraphBuilder(first_id=graph.max_id() + 1)
    mapping: dict[int, object] = {}

    def resolve(slot):
        seen = set()
        while isinstance(slot, int) and slot in plan and plan[slot][0] == "drop":
            if slot in seen:
                raise AssertionError("cyclic drop chain in rewrite plan")
            seen.add(slot)
            slot = plan[slot][1]
        return slot

    for oid in topological_order(graph):
        op = graph.by_id[oid]
        action = plan.get(oid)
        if action is not None and action[0] in ("skip", "drop"):
            continue
        if action is not None and action[0] == "new":
            _a, kind, slots_src, attrs = action
        else:
            kind, slots_src, attrs = op.kind, op.inputs, dict(op.attrs)
        slots = []
        for s in slots_src:
            s = resolve(s)
            if isinstance(s, int):
                slots.append(mapping[s])
            else:
                slots.append(s)
        mapping[oid] = b.add_operation(Operation(b._next, kind, tuple(slots), dict(attrs)))
    outputs = []
    for o in graph.outputs:
        r = resolve(o)
        if not isinstance(r, int):
            raise AssertionError("graph output rewired to a constant")
        outputs.append(mapping[r])
    return b.build(outputs)


def _disjoint(sites):
    """Keep sites in order, skipping any that shares a node with an earlier one."""
    used: set = set()
    kept = []
    for site in sites:
        if any(s in used for s in site):
            continue
        used.update(site)
        kept.append(site)
    return kept


# --------------------------------------------------------------------------
# passes
# --------------------------------------------------------------------------


def remove_identities(graph: OperationGraph):
    """Drop Identity nodes, single-input Concats, and no-op Flattens."""
    plan = {}
    for op in graph.operations:
        if op.kind == "Identity":
            removable = True
        elif op.kind == "Concat" and len(op.inputs) == 1:
            removable = True
        elif op.kind == "Flatten":
            src = op.inputs[0]
            src_shape = src.shape if isinstance(src, TensorValue) else graph.shape_of(src)
            removable = graph.shape_of(op.id) == tuple(src_shape)
        else:
            removable = False
        if not removable:
            continue
        target = op.inputs[0]
        if op.id in graph.outputs and not isinstance(target, int):
            continue  # cannot surface a bare constant as a graph output
        plan[op.id] = ("drop", target)
    if not plan:
        return graph, 0
    return _apply(graph, plan), len(plan)


def matmul_add_to_gemm(graph: OperationGraph):
    """Fuse ``x @ W`` followed by a constant Add into a single Gemm."""
    plan = {}
    count = 0
    for mm_id, add_id in _disjoint(match_pattern(graph, ["MatMul", "Add"])):
        mm = graph.by_id[mm_id]
        add = graph.by_id[add_id]
        x, w = mm.inputs
        if not isinstance(x, int) or not isinstance(w, TensorValue) or len(w.shape) != 2:
            continue
        other = [s for s in add.inputs if s != mm_id]
        if len(other) != 1 or not isinstance(other[0], TensorValue):
            continue
        bias = other[0]
        m = w.shape[1]
        mm_shape = graph.shape_of(mm_id)
        try:
            if tuple(np.broadcast_shapes(mm_shape, bias.shape)) != tuple(mm_shape):
                continue
        except ValueError:
            continue
        if bias.size not in (1, m):
            continue
        bvec = np.broadcast_to(bias.data.reshape(-1) if bias.size == m else bias.data.reshape(()), (m,))
        plan[mm_id] = ("skip",)
        plan[add_id] = (
            "new",
            "Gemm",
            (x, TensorValue(w.data.T, dtype=w.dtype), TensorValue(np.array(bvec), dtype=bias.dtype)),
            {},
        )
        count += 1
    if not count:
        return graph, 0
    return _apply(graph, plan), count


def _bn_scale(op: Operation):
    gamma, beta, mean, var = (s.data for s in op.inputs[1:])
    s = gamma / np.sqrt(var + op.attrs["epsilon"])
    return s, beta, mean


def fuse_batch_norm(graph: OperationGraph):
    """Fold batch norms into a preceding Conv/Gemm, else make them 1x1 Convs."""
    plan = {}
    count = 0
    folded_bns = set()
    for prod_id, bn_id in _disjoint(match_pattern(graph, [("Conv", "Gemm"), "BatchNormalization"])):
        prod = graph.by_id[prod_id]
        bn = graph.by_id[bn_id]
        s, beta, mean = _bn_scale(bn)
        w, b = prod.inputs[1], prod.inputs[2]
        if prod.kind == "Conv":
            neww = w.data * s[:, None, None, None]
        else:
            neww = w.data * s[:, None]
        newb = s * (b.data - mean) + beta
        plan[prod_id] = ("skip",)
        plan[bn_id] = (
            "new",
            prod.kind,
            (prod.inputs[0], TensorValue(neww, dtype=w.dtype), TensorValue(newb, dtype=b.dtype)),
            dict(prod.attrs),
        )
        folded_bns.add(bn_id)
        count += 1
    for op in graph.operations:
        if op.kind != "BatchNormalization" or op.id in folded_bns:
            continue
        src = op.inputs[0]
        src_shape = src.shape if isinstance(src, TensorValue) else graph.shape_of(src)
        if len(src_shape) != 4:
            continue  # a 1x1 Conv replacement needs NCHW layout
        s, beta, mean = _bn_scale(op)
        c = src_shape[1]
        w = np.zeros((c, c, 1, 1))
        w[np.arange(c), np.arange(c), 0, 0] = s
        gamma_t = op.inputs[1]
        plan[op.id] = (
            "new",
            "Conv",
            (src, TensorValue(w, dtype=gamma_t.dtype), TensorValue(beta - s * mean, dtype=gamma_t.dtype)),
            {"kernel_shape": (1, 1), "strides": (1, 1), "pads": (0, 0, 0, 0)},
        )
        count += 1
    if not count:
        return graph, 0
    return _apply(graph, plan), count


def combine_consecutive_gemm(graph: OperationGraph):
    """Collapse Gemm(W2,b2) after Gemm(W1,b1) into Gemm(W2 W1, W2 b1 + b2)."""
    plan = {}
    count = 0
    for g1_id, g2_id in _disjoint(match_pattern(graph, ["Gemm", "Gemm"])):
        g1, g2 = graph.by_id[g1_id], graph.by_id[g2_id]
        w1, b1 = g1.inputs[1].data, g1.inputs[2].data
        w2, b2 = g2.inputs[1].data, g2.inputs[2].data
        plan[g1_id] = ("skip",)
        plan[g2_id] = (
            "new",
            "Gemm",
            (
                g1.inputs[0],
                TensorValue(w2 @ w1, dtype=g2.inputs[1].dtype),
                TensorValue(w2 @ b1 + b2, dtype=g2.inputs[2].dtype),
            ),
            {},
        )
        count += 1
    if not count:
        return graph, 0
    return _apply(graph, plan), count


def combine_consecutive_conv(graph: OperationGraph):
    """Fold a per-channel 1x1 scaling Conv into the Conv that follows it.

    Applies only when the first Conv has a diagonal 1x1 kernel, stride 1,
    and no padding, and the second Conv has no padding; the first Conv then
    acts as y[c] = s[c] x[c] + t[c], which the second kernel absorbs.
    """
    plan = {}
    count = 0
    for c1_id, c2_id in _disjoint(match_pattern(graph, ["Conv", "Conv"])):
        c1, c2 = graph.by_id[c1_id], graph.by_id[c2_id]
        w1 = c1.inputs[1].data
        if c1.attrs["kernel_shape"] != (1, 1) or c1.attrs["strides"] != (1, 1):
            continue
        if any(c1.attrs["pads"]) or any(c2.attrs["pads"]):
            continue
        cch = w1.shape[0]
        if w1.shape[1] != cch:
            continue
        diag = w1[:, :, 0, 0]
        if np.any(diag != np.diag(np.diag(diag))):
            continue
        s = np.diag(diag)
        t = c1.inputs[2].data
        w2, b2 = c2.inputs[1].data, c2.inputs[2].data
        neww = w2 * s[None, :, None, None]
        newb = b2 + np.einsum("mcij,c->m", w2, t)
        plan[c1_id] = ("skip",)
        plan[c2_id] = (
            "new",
            "Conv",
            (
                c1.inputs[0],
                TensorValue(neww, dtype=c2.inputs[1].dtype),
                TensorValue(newb, dtype=c2.inputs[2].dtype),
            ),
            dict(c2.attrs),
        )
        count += 1
    if not count:
        return graph, 0
    return _apply(graph, plan), count


def bundle_pad(graph: OperationGraph):
    """Merge zero-valued constant Pads into a following Conv or MaxPool."""
    plan = {}
    count = 0
    for pad_id, cons_id in _disjoint(match_pattern(graph, ["Pad", ("Conv", "MaxPool")])):
        pad = graph.by_id[pad_id]
        cons = graph.by_id[cons_id]
        if float(pad.attrs["value"]) != 0.0:
            continue
        pads = pad.attrs["pads"]
        if len(pads) != 8:
            continue  # consumer is spatial, so the Pad must be over NCHW
        b0, b1, b2, b3, e0, e1, e2, e3 = pads
        if b0 or b1 or e0 or e1:
            continue
        pt, pl, pb, pr = cons.attrs["pads"]
        attrs = dict(cons.attrs)
        attrs["pads"] = (pt + b2, pl + b3, pb + e2, pr + e3)
        plan[pad_id] = ("skip",)
        plan[cons_id] = ("new", cons.kind, (pad.inputs[0],) + cons.inputs[1:], attrs)
        count += 1
    if not count:
        return graph, 0
    return _apply(graph, plan), count


_RESHAPING = ("Reshape", "Flatten", "Transpose")
_ACTIVATIONS = ("Relu", "Sigmoid", "Tanh")


def move_activations_backward(graph: OperationGraph):
    """Swap an activation with the reshaping operation that feeds it."""
    plan = {}
    count = 0
    for r_id, a_id in _disjoint(match_pattern(graph, [_RESHAPING, _ACTIVATIONS])):
        r, a = graph.by_id[r_id], graph.by_id[a_id]
        plan[r_id] = ("new", a.kind, (r.inputs[0],), {})
        plan[a_id] = ("new", r.kind, (r_id,), dict(r.attrs))
        count += 1
    if not count:
        return graph, 0
    return _apply(graph, plan), count


_PASSES = (
    ("identities", remove_identities),
    ("matmul_add", matmul_add_to_gemm),
    ("batch_norm", fuse_batch_norm),
    ("conv_combine", combine_consecutive_conv),
    ("gemm_combine", combine_consecutive_gemm),
    ("pad_bundle", bundle_pad),
    ("activation_move", move_activations_backward),
)


def simplify(graph: OperationGraph):
    """Run all passes to a fixpoint; returns (graph, SimplifyReport)."""
    report = SimplifyReport(
        passes={name: 0 for name, _ in _PASSES}, before_nodes=len(graph), after_nodes=len(graph)
    )
    # every firing strictly shrinks (nodes, activation inversions); this cap
    # is far beyond what that well-founded measure allows
    cap = 7 * (len(graph) + 2) * (len(graph) + 2)
    while True:
        fired = 0
        for name, fn in _PASSES:
            graph, n = fn(graph)
            report.passes[name] += n
            fired += n
        report.sweeps += 1
        if not fired:
            break
        if report.total() > cap:
            raise AssertionError("simplification fixpoint loop exceeded its termination bound")
    report.after_nodes = len(graph)
    return graph, report
