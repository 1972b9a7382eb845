"""VNNLIB emission: a companion ONNX model plus an SMT-LIB style property.

``X_i`` names flat network inputs, ``Y_i`` flat outputs. The property
file asserts the input polytope rows over X and the violation condition
``(<= Y_0 Y_1)``, so an external sat means the original property is
violated. Values carry 17 significant digits. See docs/formats/vnnlib.md.
"""

from __future__ import annotations

import numpy as np

from ..errors import IoError, NonFlatTensors
from ..onnx_io import ModelMetadata, serialize_onnx

__all__ = ["write_vnnlib", "read_vnnlib"]


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def _flat_size(shape) -> int:
    shape = tuple(shape)
    if len(shape) > 2 or (len(shape) == 2 and shape[0] != 1):
        raise NonFlatTensors(f"tensor shape {shape} is not flat")
    return int(np.prod(shape)) if shape else 1


def write_vnnlib(rp, onnx_path, path) -> None:
    """Emit the suffixed network as ONNX plus a .vnnlib property file."""
    n = _flat_size(rp.network.input_shapes[0])
    m = _flat_size(rp.network.output_shapes[0])
    serialize_onnx(rp.network, ModelMetadata(), onnx_path)
    lines = ["; reachability problem: sat means the original property is violated"]
    for i in range(n):
        lines.append(f"(declare-const X_{i} Real)")
    for i in range(m):
        lines.append(f"(declare-const Y_{i} Real)")
    lines.append("; input region")
    for row, bound in zip(rp.input_polytope.A, rp.input_polytope.b):
        nz = np.nonzero(row)[0]
        if nz.size == 1 and row[nz[0]] in (1.0, -1.0):
            j = nz[0]
            if row[j] == 1.0:
                lines.append(f"(assert (<= X_{j} {_fmt(bound)}))")
            else:
                lines.append(f"(assert (>= X_{j} {_fmt(-bound)}))")
        else:
            terms = " ".join(f"(* {_fmt(row[j])} X_{j})" for j in nz)
            if nz.size == 1:
                lines.append(f"(assert (<= {terms} {_fmt(bound)}))")
            else:
                lines.append(f"(assert (<= (+ {terms}) {_fmt(bound)}))")
    lines.append("; violation condition")
    lines.append("(assert (<= Y_0 Y_1))")
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def _tokenize(text: str):
    out = []
    tok = ""
    for ch in text:
        if ch in "()":
            if tok:
                out.append(tok)
                tok = ""
            out.append(ch)
        elif ch.isspace():
            if tok:
                out.append(tok)
                tok = ""
        else:
            tok += ch
    if tok:
        out.append(tok)
    return out


def _sexprs(tokens):
    stack = [[]]
    for t in tokens:
        if t == "(":
            stack.append([])
        elif t == ")":
            done = stack.pop()
            if not stack:
                raise IoError("unbalanced parentheses in vnnlib file")
            stack[-1].append(done)
        else:
            stack[-1].append(t)
    if len(stack) != 1:
        raise IoError("unbalanced parentheses in vnnlib file")
    return stack[0]


def _linear_terms(node, n: int, m: int):
    """Affine interpretation of an s-expression over X_i / Y_i symbols."""
    xs = np.zeros(n)
    ys = np.zeros(m)
    const = 0.0
    if isinstance(node, str):
        if node.startswith("X_"):
            xs[int(node[2:])] += 1.0
        elif node.startswith("Y_"):
            ys[int(node[2:])] += 1.0
        else:
            const += float(node)
        return xs, ys, const
    head = node[0]
    if head == "+":
        for child in node[1:]:
            x2, y2, c2 = _linear_terms(child, n, m)
            xs += x2
            ys += y2
            const += c2
        return xs, ys, const
    if head == "*" and len(node) == 3:
        x2, y2, c2 = _linear_terms(node[2], n, m)
        factor = float(node[1])
        return xs + factor * x2, ys + factor * y2, const + factor * c2
    raise IoError(f"unsupported vnnlib term {head!r}")


def read_vnnlib(path):
    """Parse a .vnnlib file back into input rows and output conditions.

    Returns (n, m, A, b, out_conditions) where each output condition is a
    (coeffs_over_Y, bound) pair meaning coeffs . Y <= bound.
    """
    text = "\n".join(
        ln for ln in open(path, "r", encoding="utf-8") if not ln.lstrip().startswith(";")
    )
    forms = _sexprs(_tokenize(text))
    n = sum(1 for f in forms if f[:1] == ["declare-const"] and f[1].startswith("X_"))
    m = sum(1 for f in forms if f[:1] == ["declare-const"] and f[1].startswith("Y_"))
    rows = []
    bounds = []
    out_conditions = []
    for f in forms:
        if f[:1] != ["assert"]:
            continue
        cmp_ = f[1]
        op = cmp_[0]
        if op not in ("<=", ">="):
            raise IoError(f"unsupported assert comparator {op!r}")
        lx, ly, lc = _linear_terms(cmp_[1], n, m)
        rx, ry, rc = _linear_terms(cmp_[2], n, m)
        xs, ys, c = lx - rx, ly - ry, rc - lc  # lhs <= rhs becomes terms <= c
        if op == ">=":
            xs, ys, c = -xs, -ys, -c
        if np.any(ys):
            if np.any(xs):
                raise IoError("an assert mixes X and Y variables")
            out_conditions.append((ys, c))
        else:
            rows.append(xs)
            bounds.append(c)
    A = np.array(rows) if rows else np.zeros((0, n))
    return n, m, A, np.array(bounds), out_conditions
