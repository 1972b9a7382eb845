"""Write a property specification, bind it, and look at the atoms.

The property below is the classic local-robustness shape: all points in
a small box around a reference image keep its predicted class. Concrete
parts (the reference image, its class) fold away during binding; what
remains lowers to linear inequalities over the network's inputs and
outputs.
"""

import tempfile
from pathlib import Path

import numpy as np

from verif import parse_dnnp
from verif.properties import bind, canonicalize
from verif.properties.nodes import AtomExpr, walk

from_demo_helpers = __import__("demo_helpers") if False else None

# a small 4-feature, 3-class network
from verif import GraphBuilder

rng = np.random.default_rng(3)
b = GraphBuilder()
x = b.input([1, 4])
h = b.op("Gemm", [x, rng.normal(size=(6, 4)), rng.normal(size=6)])
r = b.op("Relu", [h])
o = b.op("Gemm", [r, rng.normal(size=(3, 6)), rng.normal(size=3)])
net = b.build([o])

with tempfile.TemporaryDirectory() as tmp:
    data = Path(tmp) / "images.npy"
    np.save(data, rng.uniform(0, 1, size=(5, 4)))
    source = f'''from data import load

N = Network("N")
i = Parameter("data_idx", type=int, default=1)
x = load("{data}")[i][None, :]
e = Parameter("epsilon", type=float)

Forall(x_, Implies(And(0 <= x_ <= 1, (x - e) < x_ < (x + e)),
                   argmax(N(x_)) == argmax(N(x))))
'''
    prop, params, networks = parse_dnnp(source)
    print("declared parameters:", [(p.name, p.type, p.default) for p in params])
    print("referenced networks:", [n.name for n in networks])

    bound = bind(prop, {"epsilon": "0.05"}, {"N": net})
    canon = canonicalize(bound)
    atoms = [n.atom for n in walk(canon.body) if isinstance(n, AtomExpr)]
    print(f"\ncanonical atoms: {len(atoms)} total")
    print("  input-space:", sum(1 for a in atoms if a.space == "input"))
    print("  output-space:", sum(1 for a in atoms if a.space == "output"))
    print("an output atom:", next(a for a in atoms if a.space == "output"))
