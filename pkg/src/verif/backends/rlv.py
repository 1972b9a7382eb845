"""RLV text format: writer plus the reader that serves as its executable spec.

One line per entity, Planet style:

    Input <name>
    Linear <name> <bias> <coeff> <input> [<coeff> <input> ...]
    ReLU   <name> <bias> <coeff> <input> [<coeff> <input> ...]
    Assert <= <const> <coeff> <name> [<coeff> <name> ...]

A Linear node is bias + sum of coeff * value; ReLU wraps that in max(0, .).
``Assert <= c terms`` states c <= sum(terms); the emitted asserts encode
the input polytope rows and the violation condition out0 <= out1, so a
solver finding the asserts satisfiable has found a violation. Values
carry 17 significant digits (full float64 round trip). See
docs/formats/rlv.md.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidGraph, IoError, NotSequential
from .layers import Layer, layers_to_graph, to_layers

__all__ = ["write_rlv", "read_rlv", "rlv_evaluate"]


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def write_rlv(rp, path) -> None:
    """Emit a reduced problem as an RLV network-plus-asserts file."""
    layers = to_layers(rp.network)
    if not layers:
        raise InvalidGraph("cannot write an empty network")
    for layer in layers:
        if layer.kind != "fc":
            raise NotSequential("the RLV format holds fully connected layers only")
    n = layers[0].weights.shape[1]
    if rp.input_dim != n:
        raise InvalidGraph(f"input polytope has {rp.input_dim} dims but the first layer takes {n}")
    if layers[-1].output_size < 2:
        raise InvalidGraph("a reduced problem's final layer carries two comparison outputs")
    lines = []
    names = [f"inX{j}" for j in range(n)]
    for name in names:
        lines.append(f"Input {name}")
    prev = names
    for l, layer in enumerate(layers):
        kind = "ReLU" if layer.activation else "Linear"
        cur = []
        for i in range(layer.output_size):
            name = f"n{l}_{i}"
            terms = " ".join(
                f"{_fmt(layer.weights[i, j])} {prev[j]}"
                for j in range(len(prev))
                if layer.weights[i, j] != 0.0
            )
            if not terms:  # a neuron with all-zero weights still needs one term
                terms = f"0 {prev[0]}"
            lines.append(f"{kind} {name} {_fmt(layer.bias[i])} {terms}")
            cur.append(name)
        prev = cur
    # input polytope rows: sum(a * x) <= b  becomes  -b <= sum(-a * x)
    H = rp.input_polytope
    for row, bound in zip(H.A, H.b):
        terms = " ".join(f"{_fmt(-a)} {names[j]}" for j, a in enumerate(row) if a != 0.0)
        lines.append(f"Assert <= {_fmt(-bound)} {terms}")
    # violation: out0 <= out1  becomes  0 <= out1 - out0
    lines.append(f"Assert <= 0 1 {prev[1]} -1 {prev[0]}")
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def read_rlv(path):
    """Parse an RLV file into inputs, neuron definitions, and asserts."""
    inputs = []
    neurons = []  # (name, kind, bias, [(coeff, src), ...]) in file order
    asserts = []  # (op, const, [(coeff, name), ...])
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "Input":
                inputs.append(parts[1])
            elif parts[0] in ("Linear", "ReLU"):
                name, bias = parts[1], float(parts[2])
                pairs = parts[3:]
                if len(pairs) % 2:
                    raise IoError(f"line {ln}: dangling coefficient")
                terms = [(float(pairs[i]), pairs[i + 1]) for i in range(0, len(pairs), 2)]
                neurons.append((name, parts[0], bias, terms))
            elif parts[0] == "Assert":
                op, const = parts[1], float(parts[2])
                pairs = parts[3:]
                terms = [(float(pairs[i]), pairs[i + 1]) for i in range(0, len(pairs), 2)]
                asserts.append((op, const, terms))
            else:
                raise IoError(f"line {ln}: unknown entity {parts[0]!r}")
    return {"inputs": inputs, "neurons": neurons, "asserts": asserts}


def rlv_evaluate(parsed, x: np.ndarray) -> dict:
    """Evaluate every neuron of a parsed RLV file at input vector ``x``."""
    values = {name: float(v) for name, v in zip(parsed["inputs"], np.asarray(x).reshape(-1))}
    for name, kind, bias, terms in parsed["neurons"]:
        acc = bias + sum(c * values[src] for c, src in terms)
        values[name] = max(0.0, acc) if kind == "ReLU" else acc
    return values


def rlv_output_names(parsed) -> list:
    """Neurons no other neuron consumes, in definition order (the outputs)."""
    used = {src for _n, _k, _b, terms in parsed["neurons"] for _c, src in terms}
    return [name for name, _k, _b, _t in parsed["neurons"] if name not in used]


def rlv_to_graph(parsed):
    """Rebuild a layered RLV file as an operation graph (round-trip oracle)."""
    by_name = {name: (kind, bias, terms) for name, kind, bias, terms in parsed["neurons"]}
    level = {name: 0 for name in parsed["inputs"]}
    for name, _kind, _bias, terms in parsed["neurons"]:
        level[name] = 1 + max((level[src] for _c, src in terms), default=0)
    depth = max(level.values(), default=0)
    prev = list(parsed["inputs"])
    layers = []
    for l in range(1, depth + 1):
        members = [n for n, _k, _b, _t in parsed["neurons"] if level[n] == l]
        if not members:
            raise IoError("the RLV file is not layered")
        kinds = {by_name[m][0] for m in members}
        if len(kinds) != 1:
            raise IoError("mixed Linear/ReLU nodes within one layer")
        w = np.zeros((len(members), len(prev)))
        b = np.zeros(len(members))
        index = {p: j for j, p in enumerate(prev)}
        for i, m in enumerate(members):
            _kind, bias, terms = by_name[m]
            b[i] = bias
            for c, src in terms:
                if src not in index:
                    raise IoError(f"neuron {m} skips a layer (consumes {src})")
                w[i, index[src]] += c
        layers.append(Layer("fc", w, b, activation=(kinds == {"ReLU"})))
        prev = members
    return layers_to_graph(layers, (len(parsed["inputs"]),))
