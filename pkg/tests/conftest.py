"""Shared builders and oracles for the test suite."""

import numpy as np
import pytest

from verif import GraphBuilder, TensorValue


def dense_net(weights_biases, input_shape, relu_last=False, dtype="float64"):
    """Stack of Gemm layers with ReLU between them (linear final layer)."""
    b = GraphBuilder()
    cur = b.input(input_shape, dtype=dtype)
    for i, (w, bias) in enumerate(weights_biases):
        cur = b.op("Gemm", [cur, TensorValue(np.asarray(w, float), dtype=dtype),
                            TensorValue(np.asarray(bias, float), dtype=dtype)])
        if i < len(weights_biases) - 1 or relu_last:
            cur = b.op("Relu", [cur])
    return b.build([cur])


def random_dense_net(rng, n_in, n_out, hidden=(), scale=1.0, input_rank1=True):
    sizes = [n_in, *hidden, n_out]
    wbs = []
    for a, c in zip(sizes, sizes[1:]):
        wbs.append((rng.normal(size=(c, a)) * scale, rng.normal(size=c) * scale))
    shape = [n_in] if input_rank1 else [1, n_in]
    return dense_net(wbs, shape)


def recursive_infer(graph, inputs):
    """Independent executor: plain recursion from the outputs, no topo order.

    Semantics are written directly (loops and explicit formulas), kept
    deliberately separate from the production executor.
    """
    given = {oid: np.asarray(v, dtype=np.float64) for oid, v in zip(graph.inputs, inputs)}
    memo = {}

    def value(oid):
        if oid in memo:
            return memo[oid]
        op = graph.by_id[oid]
        if op.kind == "Input":
            memo[oid] = given[oid]
            return memo[oid]
        vals = [value(s) if isinstance(s, int) else s.data for s in op.inputs]
        memo[oid] = _recursive_eval(op, vals)
        return memo[oid]

    return [value(o) for o in graph.outputs]


def _recursive_eval(op, vals):
    k = op.kind
    if k == "Gemm":
        x, w, b = vals
        if x.ndim == 1:
            out = np.array([float(np.sum(w[i] * x)) + b[i] for i in range(w.shape[0])])
        else:
            out = np.stack(
                [
                    np.array([float(np.sum(w[i] * row)) + b[i] for i in range(w.shape[0])])
                    for row in x
                ]
            )
        return out
    if k == "MatMul":
        return np.matmul(vals[0], vals[1])
    if k == "Add":
        return vals[0] + vals[1]
    if k == "Sub":
        return vals[0] - vals[1]
    if k == "Mul":
        return vals[0] * vals[1]
    if k == "Div":
        return vals[0] / vals[1]
    if k == "Relu":
        return np.where(vals[0] > 0, vals[0], 0.0)
    if k == "Sigmoid":
        return 1.0 / (1.0 + np.exp(-vals[0]))
    if k == "Tanh":
        return np.tanh(vals[0])
    if k == "Identity":
        return vals[0]
    if k == "Concat":
        return np.concatenate(vals, axis=op.attrs["axis"])
    if k == "Flatten":
        a = op.attrs["axis"]
        s = vals[0].shape
        return vals[0].reshape(int(np.prod(s[:a])) if a else 1, -1)
    if k == "Reshape":
        target = list(op.attrs["shape"])
        for i, d in enumerate(target):
            if d == 0:
                target[i] = vals[0].shape[i]
        return vals[0].reshape(target)
    if k == "Transpose":
        return vals[0].transpose(op.attrs["perm"])
    if k == "Conv":
        x, w, b = vals
        pt, pl, pb, pr = op.attrs["pads"]
        sh, sw = op.attrs["strides"]
        kh, kw = w.shape[2], w.shape[3]
        xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
        ho = (xp.shape[2] - kh) // sh + 1
        wo = (xp.shape[3] - kw) // sw + 1
        out = np.zeros((x.shape[0], w.shape[0], ho, wo))
        for nn in range(x.shape[0]):
            for mm in range(w.shape[0]):
                for i in range(ho):
                    for j in range(wo):
                        patch = xp[nn, :, i * sh : i * sh + kh, j * sw : j * sw + kw]
                        out[nn, mm, i, j] = np.sum(patch * w[mm]) + b[mm]
        return out
    if k == "MaxPool":
        x = vals[0]
        pt, pl, pb, pr = op.attrs["pads"]
        sh, sw = op.attrs["strides"]
        kh, kw = op.attrs["kernel_shape"]
        xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)), constant_values=-np.inf)
        ho = (xp.shape[2] - kh) // sh + 1
        wo = (xp.shape[3] - kw) // sw + 1
        out = np.zeros((x.shape[0], x.shape[1], ho, wo))
        for nn in range(x.shape[0]):
            for cc in range(x.shape[1]):
                for i in range(ho):
                    for j in range(wo):
                        out[nn, cc, i, j] = xp[nn, cc, i * sh : i * sh + kh, j * sw : j * sw + kw].max()
        return out
    if k == "BatchNormalization":
        x, g, bt, mu, var = vals
        shape = (1, -1) + (1,) * (x.ndim - 2)
        s = g / np.sqrt(var + op.attrs["epsilon"])
        return x * s.reshape(shape) + (bt - mu * s).reshape(shape)
    if k == "Pad":
        pads = op.attrs["pads"]
        r = len(pads) // 2
        return np.pad(
            vals[0],
            [(pads[i], pads[r + i]) for i in range(r)],
            constant_values=float(op.attrs["value"]),
        )
    raise NotImplementedError(k)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
