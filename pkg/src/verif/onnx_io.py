"""Read and write ONNX model files for the supported operation subset.

The reader accepts opset versions 9 through 13 and normalizes nodes into
the internal conventions (Gemm weights stored row-per-neuron with alpha
and beta folded into the constants, Pad amounts as attributes, Reshape
targets as attributes). The writer emits opset 13 with every tensor in a
single promoted element type so the model type-checks end to end.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import protowire as pw
from .errors import (
    InvalidGraph,
    IoError,
    MalformedModel,
    ShapeUnknown,
    UnsupportedOperation,
    UnsupportedOpset,
)
from .ir import GraphBuilder, Operation, OperationGraph, TensorValue, op_output_shape, topological_order

__all__ = ["ModelMetadata", "parse_onnx", "serialize_onnx"]

_DT_FLOAT, _DT_INT32, _DT_INT64, _DT_DOUBLE = 1, 6, 7, 11

_ACCEPTED_OPSETS = range(9, 14)

_EMITTED_OPSET = 13
_IR_VERSION = 7


@dataclass
class ModelMetadata:
    """Names and declared shapes carried alongside a parsed graph."""

    producer: str = ""
    opset: int = _EMITTED_OPSET
    input_names: list = field(default_factory=list)
    output_names: list = field(default_factory=list)
    input_shapes: list = field(default_factory=list)
    output_shapes: list = field(default_factory=list)

    def __post_init__(self):
        names = list(self.input_names) + list(self.output_names)
        if len(set(names)) != len(names):
            raise MalformedModel("duplicate graph input/output name in metadata")


# --------------------------------------------------------------------------
# decoding
# --------------------------------------------------------------------------


def _decode_attr(buf):
    name = ""
    atype = 0
    single = None
    ints = []
    floats = []
    strings = []
    tensor = None
    for f, wire, v in pw.iter_fields(buf):
        if f == 1:
            name = bytes(v).decode("utf-8")
        elif f == 2:
            single = struct.unpack("<f", v)[0]
        elif f == 3:
            single = pw.to_int64(v)
        elif f == 4:
            single = bytes(v).decode("utf-8", "replace")
        elif f == 5:
            tensor = _decode_tensor(v)
        elif f == 7:
            if wire == 2:
                pos = 0
                mv = memoryview(v)
                while pos < len(mv):
                    floats.append(struct.unpack_from("<f", mv, pos)[0])
                    pos += 4
            else:
                floats.append(struct.unpack("<f", v)[0])
        elif f == 8:
            if wire == 2:
                pos = 0
                mv = memoryview(v)
                while pos < len(mv):
                    val, pos = pw._decode_varint(mv, pos)
                    ints.append(pw.to_int64(val))
            else:
                ints.append(pw.to_int64(v))
        elif f == 9:
            strings.append(bytes(v).decode("utf-8", "replace"))
        elif f == 20:
            atype = v
    if atype == 1:
        value = float(single)
    elif atype == 2:
        value = int(single)
    elif atype == 3:
        value = single
    elif atype == 4:
        value = tensor
    elif atype == 6:
        value = tuple(floats)
    elif atype == 7:
        value = tuple(ints)
    elif atype == 8:
        value = tuple(strings)
    else:
        value = single if single is not None else tuple(ints) or tuple(floats) or None
    return name, value


def _decode_tensor(buf):
    dims = []
    dtype = 0
    name = ""
    raw = None
    floats = []
    doubles = []
    int32s = []
    int64s = []
    for f, wire, v in pw.iter_fields(buf):
        if f == 1:
            dims.append(pw.to_int64(v))
        elif f == 2:
            dtype = v
        elif f == 4:
            if wire == 2:
                arr = np.frombuffer(bytes(v), dtype="<f4")
                floats.extend(arr.tolist())
            else:
                floats.append(struct.unpack("<f", v)[0])
        elif f == 5:
            if wire == 2:
                pos = 0
                mv = memoryview(v)
                while pos < len(mv):
                    val, pos = pw._decode_varint(mv, pos)
                    int32s.append(pw.to_int64(val))
            else:
                int32s.append(pw.to_int64(v))
        elif f == 7:
            if wire == 2:
                pos = 0
                mv = memoryview(v)
                while pos < len(mv):
                    val, pos = pw._decode_varint(mv, pos)
                    int64s.append(pw.to_int64(val))
            else:
                int64s.append(pw.to_int64(v))
        elif f == 8:
            name = bytes(v).decode("utf-8")
        elif f == 9:
            raw = bytes(v)
        elif f == 10:
            if wire == 2:
                arr = np.frombuffer(bytes(v), dtype="<f8")
                doubles.extend(arr.tolist())
            else:
                doubles.append(struct.unpack("<d", v)[0])
        elif f == 14 and v != 0:
            raise MalformedModel(f"tensor {name!r} uses external data, which is not supported")
    shape = tuple(int(d) for d in dims)
    if dtype == _DT_FLOAT:
        arr = np.frombuffer(raw, dtype="<f4") if raw is not None else np.array(floats, dtype=np.float32)
        decl = "float32"
    elif dtype == _DT_DOUBLE:
        arr = np.frombuffer(raw, dtype="<f8") if raw is not None else np.array(doubles, dtype=np.float64)
        decl = "float64"
    elif dtype == _DT_INT64:
        arr = np.frombuffer(raw, dtype="<i8") if raw is not None else np.array(int64s, dtype=np.int64)
        decl = "int64"
    elif dtype == _DT_INT32:
        arr = np.frombuffer(raw, dtype="<i4") if raw is not None else np.array(int32s, dtype=np.int32)
        decl = "int32"
    else:
        raise MalformedModel(f"tensor {name!r} has unsupported element type {dtype}")
    expected = int(np.prod(shape)) if shape else 1
    if arr.size != expected:
        raise MalformedModel(f"tensor {name!r}: buffer holds {arr.size} values, dims say {expected}")
    return {"name": name, "dtype": decl, "array": arr.reshape(shape)}


def _decode_value_info(buf):
    name = ""
    elem = None
    dims = []
    for f, _w, v in pw.iter_fields(buf):
        if f == 1:
            name = bytes(v).decode("utf-8")
        elif f == 2:
            for f2, _w2, v2 in pw.iter_fields(v):
                if f2 == 1:  # tensor_type
                    for f3, _w3, v3 in pw.iter_fields(v2):
                        if f3 == 1:
                            elem = v3
                        elif f3 == 2:  # shape
                            for f4, _w4, v4 in pw.iter_fields(v3):
                                if f4 == 1:  # dimension
                                    dim = None
                                    for f5, _w5, v5 in pw.iter_fields(v4):
                                        if f5 == 1:
                                            dim = pw.to_int64(v5)
                                        elif f5 == 2:
                                            dim = bytes(v5).decode("utf-8")
                                    dims.append(dim)
    return {"name": name, "elem_type": elem, "dims": dims}


def _decode_node(buf):
    inputs, outputs, attrs = [], [], {}
    name = ""
    op_type = ""
    for f, _w, v in pw.iter_fields(buf):
        if f == 1:
            inputs.append(bytes(v).decode("utf-8"))
        elif f == 2:
            outputs.append(bytes(v).decode("utf-8"))
        elif f == 3:
            name = bytes(v).decode("utf-8")
        elif f == 4:
            op_type = bytes(v).decode("utf-8")
        elif f == 5:
            aname, aval = _decode_attr(v)
            attrs[aname] = aval
    return {"name": name, "op_type": op_type, "inputs": inputs, "outputs": outputs, "attrs": attrs}


def _decode_graph(buf):
    nodes, inits, inputs, outputs = [], [], [], []
    name = ""
    for f, _w, v in pw.iter_fields(buf):
        if f == 1:
            nodes.append(_decode_node(v))
        elif f == 2:
            name = bytes(v).decode("utf-8")
        elif f == 5:
            inits.append(_decode_tensor(v))
        elif f == 11:
            inputs.append(_decode_value_info(v))
        elif f == 12:
            outputs.append(_decode_value_info(v))
    return {"name": name, "nodes": nodes, "initializers": inits, "inputs": inputs, "outputs": outputs}


def _decode_model(data: bytes):
    graph = None
    producer = ""
    opsets = []
    for f, _w, v in pw.iter_fields(data):
        if f == 1:
            pass  # ir_version
        elif f == 2:
            producer = bytes(v).decode("utf-8", "replace")
        elif f == 7:
            graph = _decode_graph(v)
        elif f == 8:
            domain = ""
            version = None
            for f2, _w2, v2 in pw.iter_fields(v):
                if f2 == 1:
                    domain = bytes(v2).decode("utf-8")
                elif f2 == 2:
                    version = pw.to_int64(v2)
            opsets.append((domain, version))
    if graph is None:
        raise MalformedModel("model has no graph")
    return {"producer": producer, "graph": graph, "opsets": opsets}


# --------------------------------------------------------------------------
# node conversion
# --------------------------------------------------------------------------


def _norm_axis(axis: int, rank: int, node: str) -> int:
    a = axis + rank if axis < 0 else axis
    if a < 0 or a > rank:
        raise MalformedModel(f"node {node!r}: axis {axis} out of range for rank {rank}")
    return a


def _require_const(env, name, node, what):
    if name not in env or not isinstance(env[name], dict):
        raise UnsupportedOperation(node["name"], node["op_type"], f"{what} must be a constant initializer")
    return env[name]


def _float_const(entry, node):
    arr = entry["array"]
    if entry["dtype"] not in ("float32", "float64"):
        raise UnsupportedOperation(node["name"], node["op_type"], f"parameter {entry['name']!r} is not float")
    return TensorValue(np.asarray(arr, dtype=np.float64), dtype=entry["dtype"])


def _only_defaults(node, attrs, defaults):
    """Reject attribute values outside the supported configuration."""
    for key, allowed in defaults.items():
        if key in attrs and attrs[key] != allowed:
            raise UnsupportedOperation(node["name"], node["op_type"], f"{key}={attrs[key]!r} not supported")


def parse_onnx(path) -> tuple:
    """Decode an ONNX file into an operation graph plus its metadata."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    try:
        model = _decode_model(data)
    except MalformedModel:
        raise
    except (pw.WireError, UnicodeDecodeError, ValueError, TypeError, struct.error) as e:
        # wrong wire types surface as type/struct errors deep in the decoders
        raise MalformedModel(f"cannot decode {path}: {e}") from e
    default_opsets = [v for d, v in model["opsets"] if d in ("", "ai.onnx")]
    if not default_opsets:
        raise MalformedModel("model declares no default-domain opset")
    opset = default_opsets[0]
    if opset not in _ACCEPTED_OPSETS:
        raise UnsupportedOpset(opset)
    g = model["graph"]

    env: dict = {}  # tensor name -> initializer entry (dict) or producer op id (int)
    for entry in g["initializers"]:
        env[entry["name"]] = entry

    builder = GraphBuilder()
    shapes: dict[str, tuple] = {}
    meta = ModelMetadata(producer=model["producer"], opset=opset)
    dtypes = {_DT_FLOAT: "float32", _DT_DOUBLE: "float64"}
    for vi in g["inputs"]:
        if vi["name"] in env:
            continue  # initializer listed as graph input (opset < 13 style)
        if vi["elem_type"] not in dtypes:
            raise MalformedModel(f"graph input {vi['name']!r} has unsupported element type")
        if not vi["dims"] or any(not isinstance(d, int) or d <= 0 for d in vi["dims"]):
            raise ShapeUnknown(f"graph input {vi['name']!r} has no static shape: {vi['dims']}")
        shape = tuple(vi["dims"])
        oid = builder.input(shape, dtype=dtypes[vi["elem_type"]])
        env[vi["name"]] = oid
        shapes[vi["name"]] = shape
        meta.input_names.append(vi["name"])
        meta.input_shapes.append(shape)

    def emit(node, kind, slots, attrs):
        op = Operation(builder._next, kind, tuple(slots), attrs)
        in_shapes = [s.shape if isinstance(s, TensorValue) else shapes[_id_name[s]] for s in slots]
        builder.add_operation(op)
        shapes[node["outputs"][0]] = op_output_shape(op, in_shapes)
        env[node["outputs"][0]] = op.id
        _id_name[op.id] = node["outputs"][0]
        return op.id

    _id_name = {env[n]: n for n in meta.input_names}

    for node in g["nodes"]:
        kind = node["op_type"]
        attrs = node["attrs"]
        name = node["name"] or (node["outputs"][0] if node["outputs"] else "?")
        node = {**node, "name": name}

        def data_slot(tname):
            if tname not in env:
                raise MalformedModel(f"node {name!r} consumes unknown tensor {tname!r}")
            v = env[tname]
            if isinstance(v, dict):
                return _float_const(v, node)
            return v

        def in_shape(tname):
            v = env[tname]
            return tuple(v["array"].shape) if isinstance(v, dict) else shapes[tname]

        if kind == "Relu" or kind == "Sigmoid" or kind == "Tanh" or kind == "Identity":
            emit(node, kind, [data_slot(node["inputs"][0])], {})
        elif kind in ("Add", "Sub", "Mul", "Div"):
            emit(node, kind, [data_slot(node["inputs"][0]), data_slot(node["inputs"][1])], {})
        elif kind == "MatMul":
            emit(node, kind, [data_slot(node["inputs"][0]), data_slot(node["inputs"][1])], {})
        elif kind == "Gemm":
            _only_defaults(node, attrs, {"transA": 0})
            a_name, b_name = node["inputs"][0], node["inputs"][1]
            if isinstance(env.get(a_name), dict):
                raise UnsupportedOperation(name, kind, "constant left operand is not supported")
            w_entry = _require_const(env, b_name, node, "weight matrix")
            w = np.asarray(w_entry["array"], dtype=np.float64)
            if w.ndim != 2:
                raise UnsupportedOperation(name, kind, "weight matrix must be rank 2")
            if not attrs.get("transB", 0):
                w = w.T
            w = w * float(attrs.get("alpha", 1.0))
            m = w.shape[0]
            if len(node["inputs"]) > 2 and node["inputs"][2]:
                c_entry = _require_const(env, node["inputs"][2], node, "bias")
                c = np.asarray(c_entry["array"], dtype=np.float64)
                try:
                    c = np.broadcast_to(c.reshape(-1) if c.ndim > 1 else c, (m,))
                except ValueError:
                    raise UnsupportedOperation(name, kind, f"bias shape {c.shape} does not broadcast to ({m},)")
                bias = np.array(c) * float(attrs.get("beta", 1.0))
                bdtype = c_entry["dtype"]
            else:
                bias = np.zeros(m)
                bdtype = w_entry["dtype"]
            emit(
                node,
                kind,
                [data_slot(a_name), TensorValue(w, dtype=w_entry["dtype"]), TensorValue(bias, dtype=bdtype)],
                {},
            )
        elif kind == "Conv":
            _only_defaults(node, attrs, {"group": 1, "auto_pad": "NOTSET"})
            if "dilations" in attrs and any(d != 1 for d in attrs["dilations"]):
                raise UnsupportedOperation(name, kind, f"dilations={attrs['dilations']} not supported")
            w_entry = _require_const(env, node["inputs"][1], node, "kernel")
            w = _float_const(w_entry, node)
            if len(w.shape) != 4:
                raise UnsupportedOperation(name, kind, "only 2-D convolution is supported")
            if len(node["inputs"]) > 2 and node["inputs"][2]:
                b = _float_const(_require_const(env, node["inputs"][2], node, "bias"), node)
            else:
                b = TensorValue(np.zeros(w.shape[0]), dtype=w.dtype)
            pads = tuple(attrs.get("pads", (0, 0, 0, 0)))
            if len(pads) != 4:
                raise UnsupportedOperation(name, kind, f"expected 4 pad amounts, got {len(pads)}")
            emit(
                node,
                kind,
                [data_slot(node["inputs"][0]), w, b],
                {
                    "kernel_shape": tuple(attrs.get("kernel_shape", w.shape[2:])),
                    "strides": tuple(attrs.get("strides", (1, 1))),
                    "pads": pads,
                },
            )
        elif kind == "BatchNormalization":
            if len([o for o in node["outputs"] if o]) > 1:
                raise UnsupportedOperation(name, kind, "training-mode outputs are not supported")
            params = [
                _float_const(_require_const(env, node["inputs"][i], node, p), node)
                for i, p in ((1, "scale"), (2, "bias"), (3, "mean"), (4, "variance"))
            ]
            emit(
                node,
                kind,
                [data_slot(node["inputs"][0])] + params,
                {"epsilon": float(attrs.get("epsilon", 1e-5))},
            )
        elif kind in ("MaxPool", "AveragePool"):
            _only_defaults(
                node, attrs, {"auto_pad": "NOTSET", "ceil_mode": 0, "storage_order": 0, "count_include_pad": 0}
            )
            if "dilations" in attrs and any(d != 1 for d in attrs["dilations"]):
                raise UnsupportedOperation(name, kind, f"dilations={attrs['dilations']} not supported")
            emit(
                node,
                kind,
                [data_slot(node["inputs"][0])],
                {
                    "kernel_shape": tuple(attrs["kernel_shape"]),
                    "strides": tuple(attrs.get("strides", (1, 1))),
                    "pads": tuple(attrs.get("pads", (0, 0, 0, 0))),
                },
            )
        elif kind == "Flatten":
            rank = len(in_shape(node["inputs"][0]))
            emit(
                node,
                kind,
                [data_slot(node["inputs"][0])],
                {"axis": _norm_axis(int(attrs.get("axis", 1)), rank, name)},
            )
        elif kind == "Reshape":
            _only_defaults(node, attrs, {"allowzero": 0})
            shp_entry = _require_const(env, node["inputs"][1], node, "target shape")
            target = tuple(int(d) for d in np.asarray(shp_entry["array"]).reshape(-1))
            emit(node, kind, [data_slot(node["inputs"][0])], {"shape": target})
        elif kind == "Transpose":
            rank = len(in_shape(node["inputs"][0]))
            perm = tuple(int(p) for p in attrs.get("perm", tuple(reversed(range(rank)))))
            emit(node, kind, [data_slot(node["inputs"][0])], {"perm": perm})
        elif kind == "Concat":
            rank = len(in_shape(node["inputs"][0]))
            axis = _norm_axis(int(attrs["axis"]), rank, name)
            emit(node, kind, [data_slot(t) for t in node["inputs"]], {"axis": axis})
        elif kind == "Pad":
            _only_defaults(node, attrs, {"mode": "constant"})
            if opset >= 11 or len(node["inputs"]) > 1:
                pads_entry = _require_const(env, node["inputs"][1], node, "pad amounts")
                pads = tuple(int(p) for p in np.asarray(pads_entry["array"]).reshape(-1))
                value = 0.0
                if len(node["inputs"]) > 2 and node["inputs"][2]:
                    v_entry = _require_const(env, node["inputs"][2], node, "pad value")
                    value = float(np.asarray(v_entry["array"]).reshape(-1)[0])
            else:
                pads = tuple(int(p) for p in attrs["pads"])
                value = float(attrs.get("value", 0.0))
            emit(node, kind, [data_slot(node["inputs"][0])], {"pads": pads, "value": value})
        else:
            raise UnsupportedOperation(name, kind)

    outputs = []
    for vo in g["outputs"]:
        tname = vo["name"]
        if tname not in env or isinstance(env[tname], dict):
            raise MalformedModel(f"graph output {tname!r} is not produced by any node")
        outputs.append(env[tname])
        meta.output_names.append(tname)
        meta.output_shapes.append(shapes[tname])
    graph = builder.build(outputs)
    return graph, meta


# --------------------------------------------------------------------------
# encoding
# --------------------------------------------------------------------------


def _enc_tensor(name: str, arr: np.ndarray, dtype: str) -> bytes:
    msg = b""
    for d in arr.shape:
        msg += pw.field_varint(1, int(d))
    if dtype == "float32":
        msg += pw.field_varint(2, _DT_FLOAT)
        raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    elif dtype == "float64":
        msg += pw.field_varint(2, _DT_DOUBLE)
        raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
    elif dtype == "int64":
        msg += pw.field_varint(2, _DT_INT64)
        raw = np.ascontiguousarray(arr, dtype="<i8").tobytes()
    else:
        raise InvalidGraph(f"cannot serialize tensor dtype {dtype!r}")
    msg += pw.field_string(8, name)
    msg += pw.field_bytes(9, raw)
    return msg


def _enc_value_info(name: str, shape, elem_type: int) -> bytes:
    dims = b""
    for d in shape:
        dims += pw.field_bytes(1, pw.field_varint(1, int(d)))
    tensor_type = pw.field_varint(1, elem_type) + pw.field_bytes(2, dims)
    return pw.field_string(1, name) + pw.field_bytes(2, pw.field_bytes(1, tensor_type))


def _enc_attr_int(name: str, value: int) -> bytes:
    return pw.field_string(1, name) + pw.field_varint(3, value) + pw.field_varint(20, 2)


def _enc_attr_float(name: str, value: float) -> bytes:
    return pw.field_string(1, name) + pw.field_float32(2, value) + pw.field_varint(20, 1)


def _enc_attr_ints(name: str, values) -> bytes:
    payload = b"".join(pw.encode_varint(int(v)) for v in values)
    return pw.field_string(1, name) + pw.field_bytes(8, payload) + pw.field_varint(20, 7)


def _enc_attr_string(name: str, value: str) -> bytes:
    return pw.field_string(1, name) + pw.field_bytes(4, value.encode()) + pw.field_varint(20, 3)


def _enc_node(name, op_type, inputs, outputs, attr_blobs) -> bytes:
    msg = b""
    for t in inputs:
        msg += pw.field_string(1, t)
    for t in outputs:
        msg += pw.field_string(2, t)
    msg += pw.field_string(3, name)
    msg += pw.field_string(4, op_type)
    for blob in attr_blobs:
        msg += pw.field_bytes(5, blob)
    return msg


def serialize_onnx(graph: OperationGraph, meta: ModelMetadata, path) -> None:
    """Write the graph as an ONNX file that re-parses to the same structure."""
    if not graph.outputs:
        raise InvalidGraph("cannot serialize a graph with no outputs")
    # one element type end to end, widened if anything is float64
    promoted = "float32"
    for op in graph.operations:
        if op.kind == "Input" and op.attrs["dtype"] == "float64":
            promoted = "float64"
        for c in op.constants():
            if c.dtype == "float64":
                promoted = "float64"
    elem = _DT_FLOAT if promoted == "float32" else _DT_DOUBLE

    in_names = list(meta.input_names) if len(meta.input_names) == len(graph.inputs) else []
    out_names = list(meta.output_names) if len(meta.output_names) == len(graph.outputs) else []
    names: dict[int, str] = {}
    for i, oid in enumerate(graph.inputs):
        names[oid] = in_names[i] if in_names else f"input{i}"
    for i, oid in enumerate(graph.outputs):
        if oid not in names:
            names[oid] = out_names[i] if out_names else f"output{i}"
    for oid in topological_order(graph):
        names.setdefault(oid, f"v{oid}")

    inits = []
    nodes = []
    for oid in topological_order(graph):
        op = graph.by_id[oid]
        if op.kind == "Input":
            continue
        in_tensors = []
        for pos, slot in enumerate(op.inputs):
            if isinstance(slot, int):
                in_tensors.append(names[slot])
            else:
                cname = f"p{oid}_{pos}"
                inits.append(_enc_tensor(cname, slot.data, promoted))
                in_tensors.append(cname)
        attrs = []
        extra_inits = []
        kind = op.kind
        if kind == "Gemm":
            attrs = [
                _enc_attr_float("alpha", 1.0),
                _enc_attr_float("beta", 1.0),
                _enc_attr_int("transA", 0),
                _enc_attr_int("transB", 1),
            ]
        elif kind == "Conv":
            attrs = [
                _enc_attr_ints("dilations", (1, 1)),
                _enc_attr_int("group", 1),
                _enc_attr_ints("kernel_shape", op.attrs["kernel_shape"]),
                _enc_attr_ints("pads", op.attrs["pads"]),
                _enc_attr_ints("strides", op.attrs["strides"]),
            ]
        elif kind in ("MaxPool", "AveragePool"):
            attrs = [
                _enc_attr_ints("kernel_shape", op.attrs["kernel_shape"]),
                _enc_attr_ints("pads", op.attrs["pads"]),
                _enc_attr_ints("strides", op.attrs["strides"]),
            ]
        elif kind == "BatchNormalization":
            attrs = [_enc_attr_float("epsilon", float(op.attrs["epsilon"]))]
        elif kind == "Flatten":
            attrs = [_enc_attr_int("axis", op.attrs["axis"])]
        elif kind == "Transpose":
            attrs = [_enc_attr_ints("perm", op.attrs["perm"])]
        elif kind == "Concat":
            attrs = [_enc_attr_int("axis", op.attrs["axis"])]
        elif kind == "Reshape":
            cname = f"p{oid}_shape"
            inits.append(_enc_tensor(cname, np.array(op.attrs["shape"], dtype=np.int64), "int64"))
            in_tensors.append(cname)
        elif kind == "Pad":
            attrs = [_enc_attr_string("mode", "constant")]
            pname = f"p{oid}_pads"
            inits.append(_enc_tensor(pname, np.array(op.attrs["pads"], dtype=np.int64), "int64"))
            vname = f"p{oid}_value"
            inits.append(_enc_tensor(vname, np.array(float(op.attrs["value"])), promoted))
            in_tensors += [pname, vname]
        nodes.append(_enc_node(f"n{oid}", kind, in_tensors, [names[oid]], attrs))

    gmsg = b""
    for n in nodes:
        gmsg += pw.field_bytes(1, n)
    gmsg += pw.field_string(2, "net")
    for t in inits:
        gmsg += pw.field_bytes(5, t)
    for oid in graph.inputs:
        gmsg += pw.field_bytes(11, _enc_value_info(names[oid], graph.shape_of(oid), elem))
    for oid in graph.outputs:
        gmsg += pw.field_bytes(12, _enc_value_info(names[oid], graph.shape_of(oid), elem))

    model = pw.field_varint(1, _IR_VERSION)
    model += pw.field_string(2, meta.producer or "verif")
    model += pw.field_bytes(7, gmsg)
    model += pw.field_bytes(8, pw.field_string(1, "") + pw.field_varint(2, _EMITTED_OPSET))
    try:
        with open(path, "wb") as fh:
            fh.write(model)
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
