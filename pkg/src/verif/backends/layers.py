"""Sequential layer view of an operation graph.

Verifier text formats want a plain stack: convolutional layers, then
fully connected layers, ReLU activations in between, linear at the end.
``to_layers`` extracts that stack or says precisely which node breaks it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import NotSequential
from ..ir import GraphBuilder, OperationGraph, TensorValue, topological_order

__all__ = ["Layer", "to_layers", "layers_to_graph"]


@dataclass
class Layer:
    kind: str  # "fc" | "conv"
    weights: np.ndarray  # fc: [out, in]; conv: [M, C, kh, kw]
    bias: np.ndarray
    activation: bool = False  # ReLU after the affine part
    strides: tuple = (1, 1)
    pads: tuple = (0, 0, 0, 0)

    @property
    def output_size(self) -> int:
        return self.weights.shape[0]


def _chain(graph: OperationGraph) -> list:
    """The graph as a single path of operations, or NotSequential."""
    if len(graph.inputs) != 1:
        raise NotSequential("the graph must have exactly one input")
    if len(graph.outputs) != 1:
        raise NotSequential("the graph must have exactly one output")
    chain = []
    cur = graph.inputs[0]
    seen = {cur}
    while cur != graph.outputs[0]:
        edges = graph.consumers(cur)
        if len(edges) != 1:
            op = graph.by_id[cur]
            raise NotSequential(
                f"operation {op.kind} (id {cur}) feeds {len(edges)} consumers; the graph branches"
            )
        nxt = edges[0][0]
        if nxt in seen:
            raise NotSequential(f"operation id {nxt} appears twice on the path")
        nxt_op = graph.by_id[nxt]
        for slot in nxt_op.inputs:
            if isinstance(slot, int) and slot != cur:
                raise NotSequential(
                    f"operation {nxt_op.kind} (id {nxt}) joins a second data path; the graph branches"
                )
        chain.append(nxt_op)
        seen.add(nxt)
        cur = nxt
    if len(chain) != len(graph) - 1:
        extra = len(graph) - 1 - len(chain)
        raise NotSequential(f"{extra} operation(s) hang off the main path")
    return chain


def to_layers(graph: OperationGraph) -> list:
    """Extract the sequential conv-then-fc layer stack of the graph."""
    layers: list[Layer] = []
    seen_fc = False
    for op in _chain(graph):
        if op.kind == "Conv":
            if seen_fc:
                raise NotSequential(f"Conv (id {op.id}) after a fully connected layer")
            if layers and not layers[-1].activation:
                raise NotSequential(f"layer before Conv (id {op.id}) has no activation")
            layers.append(
                Layer(
                    "conv",
                    np.array(op.inputs[1].data),
                    np.array(op.inputs[2].data),
                    strides=tuple(op.attrs["strides"]),
                    pads=tuple(op.attrs["pads"]),
                )
            )
        elif op.kind == "Gemm":
            seen_fc = True
            layers.append(Layer("fc", np.array(op.inputs[1].data), np.array(op.inputs[2].data)))
        elif op.kind == "Relu":
            if not layers:
                raise NotSequential(f"Relu (id {op.id}) before any affine layer")
            if layers[-1].activation:
                raise NotSequential(f"double activation at Relu (id {op.id})")
            layers[-1].activation = True
        elif op.kind == "Flatten":
            continue  # row-major flattening at the conv/fc boundary is implicit
        else:
            raise NotSequential(f"operation {op.kind} (id {op.id}) has no layer equivalent")
    return layers


def layers_to_graph(layers, input_shape, dtype: str = "float64") -> OperationGraph:
    """Rebuild an operation graph from a layer stack (the replay oracle)."""
    b = GraphBuilder()
    cur = b.input(input_shape, dtype=dtype)
    cur_rank = len(tuple(input_shape))
    for i, layer in enumerate(layers):
        if layer.kind == "conv":
            cur = b.op(
                "Conv",
                [cur, TensorValue(layer.weights), TensorValue(layer.bias)],
                strides=layer.strides,
                pads=layer.pads,
            )
        else:
            if cur_rank > 2:
                cur = b.op("Flatten", [cur], axis=1)
                cur_rank = 2
            cur = b.op("Gemm", [cur, TensorValue(layer.weights), TensorValue(layer.bias)])
        if layer.activation:
            cur = b.op("Relu", [cur])
    return b.build([cur])
