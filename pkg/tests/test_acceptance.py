"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest -s tests/test_acceptance.py`` to see the per-criterion
lines. Budgeted criteria assert their own wall-clock limits.
"""

import itertools
import re
import stat
import time

import numpy as np
import pytest

from verif import GraphBuilder, TensorValue, infer, infer_many, parse_dnnp
from verif.backends import (
    ibp_verify,
    read_nnet,
    rlv_evaluate,
    rlv_output_names,
    read_rlv,
    read_vnnlib,
    sample_falsify,
    write_nnet,
    write_rlv,
    write_vnnlib,
)
from verif.cli import main
from verif.errors import DnfTooLarge
from verif.onnx_io import ModelMetadata, parse_onnx, serialize_onnx
from verif.properties import bind, canonicalize, holds_at
from verif.properties.canonical import LinearAtom
from verif.properties.nodes import And, AtomExpr, BoolConst, Implies, Not, Or, walk
from verif.reduce import HalfspacePolytope, ReducedProblem, construct_suffix, disjunct_to_hpolytope, negate_and_dnf, reduce
from verif.runner import RunOptions, VerifierPlugin, run, validate_counterexample
from verif.simplify import simplify

from conftest import dense_net, random_dense_net
from test_simplify import build_pattern_zoo, same_function


def _announce(num, name):
    print(f"\nacceptance criterion {num} ({name}): PASS")


# --------------------------------------------------------------------------
# criterion 1: halfspace-polytope construction (Lemma 1 form)
# --------------------------------------------------------------------------


def test_criterion_1_polytope_membership_matches_atoms():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    comparators = ("<=", "<", ">", ">=")
    for trial in range(200):
        m = int(rng.integers(1, 5))
        k = int(rng.integers(1, 6))
        atoms = []
        unit_strict = []
        for _ in range(k):
            op = comparators[rng.integers(4)]
            if rng.random() < 0.35:
                # axis-unit atom: its exact boundary point is constructible
                j = int(rng.integers(m))
                coeffs = np.zeros(m)
                coeffs[j] = 1.0
                rhs = float(rng.normal())
                atom = LinearAtom("output", coeffs, op, rhs)
                if op in ("<", ">"):
                    unit_strict.append((atom, j, rhs))
            else:
                coeffs = rng.normal(size=m)
                if not np.any(coeffs):
                    coeffs[0] = 1.0
                atom = LinearAtom("output", coeffs, op, float(rng.normal()))
            atoms.append(atom)
        H = disjunct_to_hpolytope(atoms, dim=m)
        ys = rng.normal(size=(10_000, m)) * 2.0
        member = np.asarray(H.contains(ys))
        atomwise = np.ones(len(ys), dtype=bool)
        off_boundary = np.ones(len(ys), dtype=bool)
        for a in atoms:
            atomwise &= a.satisfied(ys)
            if a.op in ("<", ">"):
                off_boundary &= (ys @ a.coeffs) != a.rhs
        assert np.array_equal(member[off_boundary], atomwise[off_boundary]), trial
        assert off_boundary.all()  # random points never land on a boundary
        # crafted boundary points of strict axis-unit atoms are excluded
        for atom, j, rhs in unit_strict:
            y = rng.normal(size=m)
            y[j] = rhs
            assert float(y @ atom.coeffs) == rhs
            assert not bool(H.contains(y))
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0, f"criterion 1 took {elapsed:.1f}s"
    _announce(1, "polytope construction, 200 conjunctions x 10^4 points")


# --------------------------------------------------------------------------
# criterion 2: suffix-network classification (Lemma 2 form), exact
# --------------------------------------------------------------------------


def test_criterion_2_suffix_classification_exact():
    rng = np.random.default_rng(202)
    for trial in range(200):
        k = int(rng.integers(1, 5))
        m = int(rng.integers(1, 4))
        A = rng.normal(size=(k, m)) * rng.choice([0.1, 1.0, 10.0])
        b = rng.normal(size=k)
        H = HalfspacePolytope(A, b)
        suffix = construct_suffix(H)
        ys = rng.normal(size=(10_000, m)) * 3.0
        outs = infer_many(suffix, [ys])[0]
        classified_in = outs[:, 0] <= outs[:, 1]
        member = (ys @ A.T <= b).all(axis=1)
        assert np.array_equal(classified_in, member), trial  # no tolerance
    _announce(2, "suffix classification, 200 polytopes x 10^4 points, exact")


# --------------------------------------------------------------------------
# the Theorem-1 corpus (shared by criteria 3 and 8)
# --------------------------------------------------------------------------


def _property_source(rng, m):
    lo = float(np.round(rng.uniform(-1.0, 0.0), 3))
    hi = float(np.round(rng.uniform(0.2, 1.2), 3))
    t1 = float(np.round(rng.normal(), 3))
    t2 = float(np.round(rng.normal(), 3))
    a, b = (0, 1) if m == 2 else tuple(rng.choice(m, size=2, replace=False))
    template = int(rng.integers(4))
    if template == 0:
        post = f"N(x_)[{a}] > N(x_)[{b}] + {t1}"
    elif template == 1:
        post = f"Or(N(x_)[{a}] > {t1}, N(x_)[{b}] <= {t2})"
    elif template == 2:
        post = f"And(N(x_)[{a}] < {t1}, N(x_)[{b}] >= {t2})"
    else:
        post = f"argmax(N(x_)) == {int(rng.integers(m))}"
    src = (
        'N = Network("N")\n'
        f"Forall(x_, Implies(And({lo} <= x_, x_ <= {hi}), {post}))"
    )
    return src, lo, hi


@pytest.fixture(scope="module")
def theorem_corpus():
    rng = np.random.default_rng(303)
    corpus = []
    while len(corpus) < 50:
        n = int(rng.integers(1, 4))
        m = int(rng.integers(2, 4))
        layers = int(rng.integers(1, 3))
        hidden = (int(rng.integers(2, 5)),) if layers == 2 else ()
        net = random_dense_net(rng, n, m, hidden=hidden)
        src, lo, hi = _property_source(rng, m)
        prop, _, _ = parse_dnnp(src)
        bound = bind(prop, {}, {"N": net})
        problems = reduce(net, canonicalize(bound))
        if not 1 <= len(problems) <= 3:
            continue
        corpus.append((net, bound, problems, lo, hi, n))
    return corpus


def test_criterion_3_reduction_equivalid(theorem_corpus):
    rng = np.random.default_rng(404)
    t0 = time.perf_counter()
    for net, bound, problems, lo, hi, n in theorem_corpus:
        xs = rng.uniform(lo, hi, size=(10_000, n))
        reduced_violation = np.zeros(len(xs), dtype=bool)
        for rp in problems:
            inside = np.asarray(rp.input_polytope.contains(xs))
            outs = infer_many(rp.network, [xs])[0].reshape(len(xs), -1)
            reduced_violation |= inside & (outs[:, 0] <= outs[:, 1])
        for i, x in enumerate(xs):
            assert (not holds_at(bound, x)) == bool(reduced_violation[i]), (x, i)
    elapsed = time.perf_counter() - t0
    assert elapsed < 120.0, f"criterion 3 took {elapsed:.1f}s"
    _announce(3, "reduction equivalid on 50 networks x 10^4 points")


# --------------------------------------------------------------------------
# criterion 4: simplification suite
# --------------------------------------------------------------------------


def test_criterion_4_simplification_preserves_semantics():
    rng = np.random.default_rng(505)
    # the pattern zoo contains every rewrite at least once, nested
    fired = {name: 0 for name in
             ("identities", "matmul_add", "batch_norm", "conv_combine",
              "gemm_combine", "pad_bundle", "activation_move")}
    for trial in range(6):
        g = build_pattern_zoo(rng)
        g2, report = simplify(g)
        for name in fired:
            fired[name] += report.passes[name]
        ok, worst = same_function(g, g2, (1, 2, 6, 6), rng, n=100, tol=1e-9)
        assert ok, f"trial {trial}: deviation {worst}"
        # idempotence and termination
        g3, report2 = simplify(g2)
        assert report2.total() == 0
        assert report.sweeps <= report.before_nodes + 2
    assert all(v >= 1 for v in fired.values()), fired
    _announce(4, "all seven simplification passes, deviation <= 1e-9")


# --------------------------------------------------------------------------
# criterion 5: DNF truth-table equivalence, exhaustive to 10 atoms
# --------------------------------------------------------------------------


def _formula(rng, atoms, depth):
    if depth == 0 or rng.random() < 0.25:
        return atoms[rng.integers(len(atoms))]
    kind = rng.integers(4)
    width = int(rng.integers(2, 4))
    if kind == 0:
        return And(tuple(_formula(rng, atoms, depth - 1) for _ in range(width)))
    if kind == 1:
        return Or(tuple(_formula(rng, atoms, depth - 1) for _ in range(width)))
    if kind == 2:
        return Not(_formula(rng, atoms, depth - 1))
    return Implies(_formula(rng, atoms, depth - 1), _formula(rng, atoms, depth - 1))


def _truth(expr, bits):
    if isinstance(expr, AtomExpr):
        j = int(np.nonzero(expr.atom.coeffs)[0][0])
        base = bits[j]
        return base if expr.atom.op in ("<=", "<") else not base
    if isinstance(expr, BoolConst):
        return expr.value
    if isinstance(expr, And):
        return all(_truth(c, bits) for c in expr.children)
    if isinstance(expr, Or):
        return any(_truth(c, bits) for c in expr.children)
    if isinstance(expr, Not):
        return not _truth(expr.child, bits)
    return (not _truth(expr.left, bits)) or _truth(expr.right, bits)


def test_criterion_5_dnf_truth_tables_exhaustive():
    rng = np.random.default_rng(606)
    checked = 0
    for k in range(1, 11):
        base = [AtomExpr(LinearAtom("output", np.eye(10)[i], "<=", 0.0)) for i in range(k)]
        covered = 0
        for _ in range(12):
            formula = _formula(rng, base, depth=3)
            try:
                disjuncts = negate_and_dnf(formula)
            except DnfTooLarge:
                continue
            covered += 1
            for bits in itertools.product([False, True], repeat=k):
                want = not _truth(formula, bits)
                got = any(all(_truth(AtomExpr(a), bits) for a in d) for d in disjuncts)
                assert got == want, (k, bits)
                checked += 1
        assert covered >= 8, f"only {covered} formulas over {k} atoms fit the DNF budget"
    _announce(5, f"DNF equivalence, {checked} truth-table rows, exhaustive to 10 atoms")


# --------------------------------------------------------------------------
# criterion 6: format fidelity and byte determinism
# --------------------------------------------------------------------------


def _fixture_problem(rng, n, hidden, flat_rank2=False):
    net = random_dense_net(rng, n, 2, hidden=hidden, input_rank1=not flat_rank2)
    idx = "[0, 0]" if flat_rank2 else "[0]"
    idx2 = "[0, 1]" if flat_rank2 else "[1]"
    src = (
        'N = Network("N")\n'
        f"Forall(x_, Implies(And(0 <= x_, x_ <= 1), N(x_){idx} > N(x_){idx2}))"
    )
    prop, _, _ = parse_dnnp(src)
    bound = bind(prop, {}, {"N": net})
    rps = reduce(net, canonicalize(bound))
    out = []
    for rp in rps:
        g, _ = simplify(rp.network)
        out.append(ReducedProblem(g, rp.input_polytope, rp.input_shape, rp.disjunct_index))
    return out[0]


def test_criterion_6_format_fidelity(tmp_path):
    rng = np.random.default_rng(707)
    for i, (n, hidden) in enumerate([(1, ()), (2, (3,)), (4, (5, 3))]):
        rp = _fixture_problem(rng, n, hidden)
        nnet_path = tmp_path / f"f{i}.nnet"
        rlv_path = tmp_path / f"f{i}.rlv"
        write_nnet(rp, nnet_path)
        write_rlv(rp, rlv_path)
        graph_n, lo, hi = read_nnet(nnet_path)
        parsed = read_rlv(rlv_path)
        outs = rlv_output_names(parsed)
        for _ in range(50):
            x = rng.uniform(0, 1, size=n)
            want = infer(rp.network, [x])[0].data.reshape(-1)
            via_nnet = infer(graph_n, [x])[0].data.reshape(-1)
            assert np.abs(want - via_nnet).max() <= 1e-6
            values = rlv_evaluate(parsed, x)
            via_rlv = np.array([values[o] for o in outs])
            assert np.abs(want - via_rlv).max() <= 1e-6
        # byte determinism across two runs
        write_nnet(rp, tmp_path / "again.nnet")
        write_rlv(rp, tmp_path / "again.rlv")
        assert (tmp_path / "again.nnet").read_bytes() == nnet_path.read_bytes()
        assert (tmp_path / "again.rlv").read_bytes() == rlv_path.read_bytes()
    # VNNLIB + ONNX pair re-checked by the built-in interval verifier
    for i in range(2):
        rp = _fixture_problem(rng, 2, (3,), flat_rank2=True)
        onnx_path, prop_path = tmp_path / f"v{i}.onnx", tmp_path / f"v{i}.vnnlib"
        write_vnnlib(rp, onnx_path, prop_path)
        graph, _ = parse_onnx(onnx_path)
        n_, m_, A, b, outc = read_vnnlib(prop_path)
        rebuilt = ReducedProblem(graph, HalfspacePolytope(A, b), tuple(graph.input_shapes[0]), 0)
        assert ibp_verify(rebuilt).status == ibp_verify(rp).status
        write_vnnlib(rp, tmp_path / "again.onnx", tmp_path / "again.vnnlib")
        assert (tmp_path / "again.onnx").read_bytes() == onnx_path.read_bytes()
        assert (tmp_path / "again.vnnlib").read_bytes() == prop_path.read_bytes()
    _announce(6, "NNET/RLV round trips <= 1e-6, VNNLIB re-verified, byte deterministic")


# --------------------------------------------------------------------------
# criterion 7: end-to-end fixtures through the command line
# --------------------------------------------------------------------------


@pytest.fixture
def bundle(tmp_path):
    # two-layer network computing (x0, 1 - x0) on the non-negative orthant
    b = GraphBuilder()
    x = b.input([1, 2], dtype="float32")
    h = b.op("Gemm", [x, TensorValue(np.eye(2), dtype="float32"), TensorValue(np.zeros(2), dtype="float32")])
    r = b.op("Relu", [h])
    o = b.op(
        "Gemm",
        [r, TensorValue(np.array([[1.0, 0.0], [-1.0, 0.0]]), dtype="float32"),
         TensorValue(np.array([0.0, 1.0]), dtype="float32")],
    )
    net = b.build([o])
    model = tmp_path / "model.onnx"
    serialize_onnx(net, ModelMetadata(), model)
    provable = tmp_path / "provable.dnnp"
    provable.write_text(
        'N = Network("N")\ne = Parameter("epsilon", type=float)\n'
        "Forall(x_, Implies(0.75 - e <= x_ <= 0.75 + e, N(x_)[0, 0] > N(x_)[0, 1]))\n"
    )
    falsifiable = tmp_path / "falsifiable.dnnp"
    falsifiable.write_text(
        'N = Network("N")\ne = Parameter("epsilon", type=float)\n'
        "Forall(x_, Implies(0.5 - e <= x_ <= 0.5 + e, N(x_)[0, 0] > N(x_)[0, 1]))\n"
    )
    return tmp_path, net, model


def test_criterion_7a_provable_unsat_under_a_second(bundle, capsys):
    tmp, _, model = bundle
    t0 = time.perf_counter()
    rc = main([str(tmp / "provable.dnnp"), "ibp", "--network", "N", str(model),
               "--prop.epsilon", "0.1"])
    elapsed = time.perf_counter() - t0
    out = capsys.readouterr().out
    assert rc == 0
    assert out.splitlines()[0] == "result: unsat"
    assert elapsed < 1.0, f"took {elapsed:.2f}s"
    _announce("7a", "provable fixture: result unsat via interval bounds, < 1 s")


def test_criterion_7b_falsifiable_sat_with_validated_witness(bundle, capsys):
    tmp, net, model = bundle
    rc = main([str(tmp / "falsifiable.dnnp"), "sample", "--network", "N", str(model),
               "--prop.epsilon", "0.3", "--seed", "11"])
    out = capsys.readouterr().out
    assert rc == 0
    lines = out.splitlines()
    assert lines[0] == "result: sat"
    cx_path = [l for l in lines if l.startswith("counterexample: ")][0].split(": ", 1)[1]
    x = np.load(cx_path)
    prop, _, _ = parse_dnnp((tmp / "falsifiable.dnnp").read_text())
    bound = bind(prop, {"epsilon": "0.3"}, {"N": net})
    assert validate_counterexample((net, bound), TensorValue(x))
    _announce("7b", "falsifiable fixture: result sat with validated counterexample")


def test_criterion_7c_lying_verifier_never_sat(bundle):
    tmp, net, model = bundle
    liar = tmp / "liar.py"
    # claims a violation at a point that satisfies the property
    liar.write_text("#!/usr/bin/env python3\nprint('SAT')\nprint('0.9 0.0')\n")
    liar.chmod(liar.stat().st_mode | stat.S_IEXEC)
    prop, _, _ = parse_dnnp((tmp / "provable.dnnp").read_text())
    bound = bind(prop, {"epsilon": "0.1"}, {"N": net})
    plugin = VerifierPlugin(name="liar", executable=str(liar), args="{rlv}", format="rlv")
    report = run((net, bound), plugin)
    assert report.status == "error"
    assert report.reason == "unvalidated counterexample"
    assert report.counterexample is None
    _announce("7c", "lying verifier downgraded to error, never sat")


# --------------------------------------------------------------------------
# criterion 8: interval-bound soundness across the corpus
# --------------------------------------------------------------------------


def test_criterion_8_ibp_sound_against_heavy_sampling(theorem_corpus):
    claims = 0
    for net, bound, problems, lo, hi, n in theorem_corpus:
        for rp in problems:
            if ibp_verify(rp).status != "unsat":
                continue
            claims += 1
            out = sample_falsify(rp, budget=100_000, seed=808)
            assert out.status != "sat", "interval verifier claimed unsat on a falsifiable problem"
    _announce(8, f"interval-bound soundness, {claims} unsat claims vs 10^5-sample search")


# --------------------------------------------------------------------------
# criterion 9: property-language conformance on the robustness form
# --------------------------------------------------------------------------


def test_criterion_9_robustness_property_structure(tmp_path):
    rng = np.random.default_rng(909)
    classes = 10
    net = random_dense_net(rng, 4, classes, hidden=(8,), input_rank1=False)
    images = rng.uniform(0.0, 1.0, size=(5, 4))
    np.save(tmp_path / "images.npy", images)
    src = f'''from data import load

N = Network("N")
mean = 0.25
std = 0.5
i = Parameter("data_idx", type=int, default=1)
x = (load("{tmp_path}/images.npy")[i][None, :] - mean) / std
e = Parameter("epsilon", type=float) / std

Forall(
 x_,
 Implies(
  And(
   (-mean / std) <= x_ <= ((1 - mean) / std),
   (x - e) < x_ < (x + e),
  ),
  argmax(N(x_)) == argmax(N(x)),
 ),
)
'''
    prop, params, nets = parse_dnnp(src)
    assert {p.name for p in params} == {"data_idx", "epsilon"}
    bound = bind(prop, {"epsilon": "0.01"}, {"N": net})
    canon = canonicalize(bound)
    # the consequent lowered to strict pairwise atoms, one per other class
    consequent = canon.body.right
    out_atoms = [a.atom for a in walk(consequent) if isinstance(a, AtomExpr)]
    assert len(out_atoms) == classes - 1
    assert all(a.op == ">" and a.space == "output" for a in out_atoms)
    problems = reduce(net, canon)
    assert len(problems) >= classes - 1
    polys = [rp for rp in problems]
    total_rows = 0
    for rp in polys:
        out_rows = sum(1 for a in rp.atoms if a.space == "output")
        assert out_rows >= 1
        total_rows += out_rows
    assert total_rows >= classes - 1
    _announce(9, f"robustness property binds, lowers, and reduces to {len(problems)} problems")
