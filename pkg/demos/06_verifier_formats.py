"""Translate one reduced problem into each verifier input format."""

import tempfile
from pathlib import Path

import numpy as np

from verif import GraphBuilder, parse_dnnp
from verif.backends import write_nnet, write_rlv, write_vnnlib
from verif.properties import bind, canonicalize
from verif.reduce import ReducedProblem, reduce
from verif.simplify import simplify

rng = np.random.default_rng(4)
b = GraphBuilder()
x = b.input([1, 2])
h = b.op("Gemm", [x, rng.normal(size=(3, 2)), rng.normal(size=3)])
r = b.op("Relu", [h])
o = b.op("Gemm", [r, rng.normal(size=(2, 3)), rng.normal(size=2)])
net = b.build([o])

src = 'N = Network("N")\nForall(x_, Implies(0 <= x_ <= 1, N(x_)[0, 0] > N(x_)[0, 1]))'
prop, _, _ = parse_dnnp(src)
rp = reduce(net, canonicalize(bind(prop, {}, {"N": net})))[0]
graph, _ = simplify(rp.network)  # merge the suffix into the layer stack
rp = ReducedProblem(graph, rp.input_polytope, rp.input_shape, rp.disjunct_index)

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    write_nnet(rp, tmp / "problem.nnet")
    write_rlv(rp, tmp / "problem.rlv")
    write_vnnlib(rp, tmp / "problem.onnx", tmp / "problem.vnnlib")
    for name in ("problem.nnet", "problem.rlv", "problem.vnnlib"):
        text = (tmp / name).read_text()
        head = "\n".join(text.splitlines()[:8])
        print(f"--- {name} ({len(text)} chars) ---\n{head}\n")
    print(f"--- problem.onnx: {(tmp / 'problem.onnx').stat().st_size} bytes of model ---")
