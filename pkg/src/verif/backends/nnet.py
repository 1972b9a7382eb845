"""NNET text format: writer and the reader that serves as its executable spec.

The layout follows the public ACAS-Xu network format: comment lines, a
counts line (numLayers, inputSize, outputSize, maxLayerSize), a layer
sizes line, a legacy flag line, input minima and maxima lines, then
normalization means and ranges (identity here: zeros and ones), then per
layer the weight matrix row by row followed by one bias per line. Every
numeric line is comma separated with a trailing comma; values carry 9
significant digits; hidden layers are ReLU activated and the final layer
is linear. See docs/formats/nnet.md.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidGraph, IoError, NotSequential, UnsupportedInput
from .layers import Layer, layers_to_graph, to_layers

__all__ = ["write_nnet", "read_nnet"]


def _fmt(v: float) -> str:
    return f"{float(v):.9g}"


def box_rows(polytope, dim: int):
    """Exact [lo, hi] from a pure axis-aligned polytope, else UnsupportedInput."""
    lo = np.full(dim, -np.inf)
    hi = np.full(dim, np.inf)
    for row, bound in zip(polytope.A, polytope.b):
        nz = np.nonzero(row)[0]
        if nz.size != 1:
            raise UnsupportedInput("the input region must be an axis-aligned box")
        j = nz[0]
        if row[j] > 0:
            hi[j] = min(hi[j], bound / row[j])
        else:
            lo[j] = max(lo[j], bound / row[j])
    if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
        raise UnsupportedInput("every input dimension needs finite lower and upper bounds")
    return lo, hi


def write_nnet(rp, path) -> None:
    """Emit a reduced problem's network and input box in NNET format."""
    layers = to_layers(rp.network)
    if not layers:
        raise InvalidGraph("cannot write an empty network")
    for layer in layers:
        if layer.kind != "fc":
            raise NotSequential("the NNET format holds fully connected layers only")
    for layer in layers[:-1]:
        if not layer.activation:
            raise NotSequential("NNET hidden layers are implicitly ReLU activated")
    if layers[-1].activation:
        raise NotSequential("the NNET output layer is linear")
    n = layers[0].weights.shape[1]
    lo, hi = box_rows(rp.input_polytope, rp.input_dim)
    if rp.input_dim != n:
        raise InvalidGraph(f"input box has {rp.input_dim} dims but the first layer takes {n}")
    sizes = [n] + [layer.output_size for layer in layers]
    lines = [
        "// reachability problem exported in NNET format",
        "// hidden layers ReLU, output linear, identity normalization",
    ]
    lines.append(f"{len(layers)},{n},{sizes[-1]},{max(sizes)},")
    lines.append(",".join(str(s) for s in sizes) + ",")
    lines.append("0,")
    lines.append(",".join(_fmt(v) for v in lo) + ",")
    lines.append(",".join(_fmt(v) for v in hi) + ",")
    lines.append(",".join(["0"] * (n + 1)) + ",")
    lines.append(",".join(["1"] * (n + 1)) + ",")
    for layer in layers:
        for i in range(layer.output_size):
            lines.append(",".join(_fmt(v) for v in layer.weights[i]) + ",")
        for i in range(layer.output_size):
            lines.append(_fmt(layer.bias[i]) + ",")
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def _numbers(line: str):
    return [float(t) for t in line.strip().split(",") if t.strip()]


def read_nnet(path):
    """Parse an NNET file back into (graph, lo, hi); the round-trip oracle."""
    with open(path, "r", encoding="utf-8") as fh:
        rows = [ln for ln in fh if not ln.startswith("//")]
    header = _numbers(rows[0])
    num_layers, input_size, output_size, _max_size = (int(v) for v in header[:4])
    sizes = [int(v) for v in _numbers(rows[1])]
    lo = np.array(_numbers(rows[3]))
    hi = np.array(_numbers(rows[4]))
    means = np.array(_numbers(rows[5]))
    ranges = np.array(_numbers(rows[6]))
    if len(lo) != input_size or len(hi) != input_size:
        raise IoError("input bound lines disagree with the declared input size")
    if np.any(means != 0.0) or np.any(ranges != 1.0):
        raise IoError("only identity normalization is supported")
    at = 7
    layers = []
    for l in range(num_layers):
        rows_w = sizes[l + 1]
        w = np.array([_numbers(rows[at + i]) for i in range(rows_w)])
        at += rows_w
        b = np.array([_numbers(rows[at + i])[0] for i in range(rows_w)])
        at += rows_w
        if w.shape != (sizes[l + 1], sizes[l]):
            raise IoError(f"layer {l} weight block has shape {w.shape}")
        layers.append(Layer("fc", w, b, activation=(l < num_layers - 1)))
    if layers[-1].output_size != output_size:
        raise IoError("declared output size disagrees with the last layer")
    return layers_to_graph(layers, (input_size,)), lo, hi
