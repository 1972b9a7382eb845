"""The whole pipeline: simplify, reduce, verify, validate, aggregate.

Runs the built-in interval verifier on a provable property and the
sampling falsifier on a falsifiable one, then repeats the falsifiable
case through an external mock verifier plugin to show the plugin path
and counterexample validation.
"""

import stat
import tempfile
from pathlib import Path

import numpy as np

from verif import GraphBuilder, TensorValue, parse_dnnp
from verif.properties import bind
from verif.runner import RunOptions, VerifierPlugin, run, validate_counterexample

b = GraphBuilder()
x = b.input([1, 2])
h = b.op("Gemm", [x, TensorValue(np.eye(2)), TensorValue(np.zeros(2))])
r = b.op("Relu", [h])
o = b.op("Gemm", [r, TensorValue(np.array([[1.0, 0.0], [-1.0, 0.0]])), TensorValue(np.array([0.0, 1.0]))])
net = b.build([o])  # (x0, 1 - x0) on the non-negative orthant

provable = 'N = Network("N")\nForall(x_, Implies(0.7 <= x_ <= 0.8, N(x_)[0, 0] > N(x_)[0, 1]))'
falsifiable = 'N = Network("N")\nForall(x_, Implies(0.2 <= x_ <= 0.8, N(x_)[0, 0] > N(x_)[0, 1]))'

prop, _, _ = parse_dnnp(provable)
report = run((net, bind(prop, {}, {"N": net})), "ibp")
print(f"interval bounds on the provable property: {report.status} "
      f"({report.problem_count} problem(s), {report.verification_time:.3f}s)")

prop, _, _ = parse_dnnp(falsifiable)
bound = bind(prop, {}, {"N": net})
report = run((net, bound), "sample", RunOptions(seed=7))
print(f"sampling on the falsifiable property: {report.status}")
print("  witness:", report.counterexample.data)
print("  validates against the original property:",
      validate_counterexample((net, bound), report.counterexample))

with tempfile.TemporaryDirectory() as tmp:
    exe = Path(tmp) / "grid_solver.py"
    exe.write_text("""#!/usr/bin/env python3
import itertools, sys
import numpy as np
inputs, neurons, asserts = [], [], []
for line in open(sys.argv[1]):
    p = line.split()
    if not p: continue
    if p[0] == "Input": inputs.append(p[1])
    elif p[0] in ("Linear", "ReLU"):
        t = [(float(p[i]), p[i+1]) for i in range(3, len(p), 2)]
        neurons.append((p[1], p[0], float(p[2]), t))
    else:
        t = [(float(p[i]), p[i+1]) for i in range(3, len(p), 2)]
        asserts.append((p[1], float(p[2]), t))
for pt in itertools.product(np.linspace(0, 1, 101), repeat=len(inputs)):
    env = dict(zip(inputs, pt))
    for name, kind, bias, terms in neurons:
        v = bias + sum(c * env[s] for c, s in terms)
        env[name] = max(0.0, v) if kind == "ReLU" else v
    if all(c <= sum(w * env[n] for w, n in t) for _, c, t in asserts):
        print("SAT"); print(" ".join(f"{v:.17g}" for v in pt)); sys.exit(0)
print("UNSAT")
""")
    exe.chmod(exe.stat().st_mode | stat.S_IEXEC)
    plugin = VerifierPlugin(name="grid", executable=str(exe), args="{rlv}", format="rlv")
    report = run((net, bound), plugin)
    print(f"\nexternal grid solver: {report.status}, witness {report.counterexample.data}")
