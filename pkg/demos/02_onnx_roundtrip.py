"""Move a network through the ONNX file format and back.

Serialization targets opset 13; the parser accepts opsets 9 through 13
and a 20-kind operation subset. Structure and constants survive a round
trip exactly.
"""

import tempfile
from pathlib import Path

import numpy as np

from verif import GraphBuilder, TensorValue, infer, parse_onnx, serialize_onnx, structurally_equal
from verif.onnx_io import ModelMetadata

rng = np.random.default_rng(1)
b = GraphBuilder()
x = b.input([1, 3], dtype="float32")
g1 = b.op("Gemm", [x, TensorValue(rng.normal(size=(5, 3)), dtype="float32"),
                   TensorValue(rng.normal(size=5), dtype="float32")])
r = b.op("Relu", [g1])
g2 = b.op("Gemm", [r, TensorValue(rng.normal(size=(2, 5)), dtype="float32"),
                   TensorValue(rng.normal(size=2), dtype="float32")])
net = b.build([g2])

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "model.onnx"
    meta = ModelMetadata(input_names=["image"], output_names=["scores"])
    serialize_onnx(net, meta, path)
    print(f"wrote {path.stat().st_size} bytes")

    parsed, meta2 = parse_onnx(path)
    print("reparsed:", parsed)
    print("names preserved:", meta2.input_names, meta2.output_names)
    print("structurally equal:", structurally_equal(net, parsed))

    xv = rng.normal(size=(1, 3))
    a = infer(net, [xv])[0].data
    c = infer(parsed, [xv])[0].data
    print("inference agrees bit for bit:", np.array_equal(a, c))
