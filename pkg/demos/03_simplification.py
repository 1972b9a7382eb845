"""Watch the rewrite passes collapse a messy graph.

A batch norm folds into the convolution before it, a zero Pad folds into
pooling, MatMul+Add becomes Gemm, consecutive Gemms merge, and the
activation slides back through the flatten. Behavior is unchanged.
"""

import numpy as np

from verif import GraphBuilder, infer, topological_order
from verif.simplify import simplify

rng = np.random.default_rng(2)
b = GraphBuilder()
x = b.input([1, 2, 6, 6])
bn = b.op("BatchNormalization",
          [x, rng.uniform(0.5, 2, 2), rng.normal(size=2), rng.normal(size=2), rng.uniform(0.5, 2, 2)])
conv = b.op("Conv", [bn, rng.normal(size=(3, 2, 3, 3)) * 0.4, rng.normal(size=3)])
act = b.op("Relu", [conv])
pad = b.op("Pad", [act], pads=(0, 0, 1, 1, 0, 0, 1, 1), value=0.0)
pool = b.op("MaxPool", [pad], kernel_shape=(2, 2), strides=(2, 2))
flat = b.op("Flatten", [pool], axis=1)
act2_in = b.op("MatMul", [flat, rng.normal(size=(27, 5)) * 0.3])
add = b.op("Add", [act2_in, rng.normal(size=5)])
head = b.op("Gemm", [add, rng.normal(size=(2, 5)), rng.normal(size=2)])
net = b.build([head])

print("before:", [net.by_id[i].kind for i in topological_order(net)])
simplified, report = simplify(net)
print("after: ", [simplified.by_id[i].kind for i in topological_order(simplified)])
print("pass applications:", {k: v for k, v in report.passes.items() if v})
print(f"nodes: {report.before_nodes} -> {report.after_nodes} in {report.sweeps} sweeps")

worst = 0.0
for _ in range(100):
    xv = rng.normal(size=(1, 2, 6, 6))
    a = infer(net, [xv])[0].data
    c = infer(simplified, [xv])[0].data
    worst = max(worst, float(np.abs(a - c).max()))
print(f"max deviation over 100 random inputs: {worst:.2e}")
