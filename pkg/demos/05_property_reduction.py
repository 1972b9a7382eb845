"""Reduce a property to canonical reachability problems and inspect one.

Each problem is "does any input inside this polytope drive the suffixed
network to out[0] <= out[1]?". The suffix is two fully connected layers
whose hidden units are exactly zero when the original outputs satisfy
the disjunct's constraints.
"""

import numpy as np

from verif import GraphBuilder, infer, parse_dnnp
from verif.properties import bind, canonicalize, holds_at
from verif.reduce import map_counterexample, reduce

# N(x) = (x, 1 - x): first output wins exactly when x > 0.5
b = GraphBuilder()
x = b.input([1])
o = b.op("Gemm", [x, np.array([[1.0], [-1.0]]), np.array([0.0, 1.0])])
net = b.build([o])

src = 'N = Network("N")\nForall(x_, Implies(And(0 <= x_, x_ <= 1), N(x_)[0] > N(x_)[1]))'
prop, _, _ = parse_dnnp(src)
bound = bind(prop, {}, {"N": net})
problems = reduce(net, canonicalize(bound))
print(f"reduced to {len(problems)} problem(s)")

rp = problems[0]
print("input polytope rows:")
for row, bnd in zip(rp.input_polytope.A, rp.input_polytope.b):
    print(f"  {row} . x <= {bnd}")
print("suffixed network:", rp.network)

for xv in (0.25, 0.75):
    outs = infer(rp.network, [np.array([xv])])[0].data
    verdict = "violates" if outs[0] <= outs[1] else "satisfies"
    print(f"x = {xv}: suffix outputs {outs} -> {verdict}")

witness = map_counterexample(rp, np.array([0.25]))
print("\nmapped witness:", witness.data, "| original property holds there:",
      holds_at(bound, witness.data))
