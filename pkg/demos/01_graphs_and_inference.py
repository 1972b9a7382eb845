"""Build an operation graph by hand and run the reference executor.

The graph is the in-memory form every other capability works on: a DAG
of tensor operations with weights attached to the nodes that use them.
"""

import numpy as np

from verif import GraphBuilder, infer, match_pattern, topological_order

# a 2-4-2 fully connected network with one ReLU layer
rng = np.random.default_rng(0)
b = GraphBuilder()
x = b.input([2])
hidden = b.op("Gemm", [x, rng.normal(size=(4, 2)), rng.normal(size=4)])
act = b.op("Relu", [hidden])
out = b.op("Gemm", [act, rng.normal(size=(2, 4)), rng.normal(size=2)])
net = b.build([out])

print("graph:", net)
print("evaluation order:", topological_order(net))
print("declared input shapes:", net.input_shapes)
print("output shapes:", net.output_shapes)

point = np.array([0.3, -0.7])
value = infer(net, [point])[0]
print(f"\nN({point.tolist()}) = {value.data}")

# pattern matching is how the rewrite passes find their work
sites = match_pattern(net, ["Gemm", "Relu"])
print("\nGemm->Relu chains:", sites)

# graphs are immutable; the executor is a pure function
again = infer(net, [point])[0]
print("same inputs, bit-identical outputs:", np.array_equal(value.data, again.data))
