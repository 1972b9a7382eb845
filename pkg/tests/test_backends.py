"""Layer extraction, format writers and their executable-spec readers."""

import numpy as np
import pytest

from verif import GraphBuilder, TensorValue, infer, parse_dnnp
from verif.backends import (
    read_nnet,
    read_rlv,
    read_vnnlib,
    rlv_evaluate,
    rlv_output_names,
    rlv_to_graph,
    to_layers,
    write_nnet,
    write_rlv,
    write_vnnlib,
)
from verif.backends.layers import layers_to_graph
from verif.backends.outcome import VerifierOutcome, parse_verifier_output
from verif.errors import InvalidGraph, NonFlatTensors, NotSequential, UnsupportedInput
from verif.properties import bind, canonicalize
from verif.reduce import HalfspacePolytope, ReducedProblem, reduce
from verif.simplify import simplify

from conftest import dense_net, random_dense_net


def _problem_from(src, net, params=None):
    prop, _, _ = parse_dnnp(src)
    bound = bind(prop, params or {}, {"N": net})
    problems = reduce(net, canonicalize(bound))
    out = []
    for rp in problems:
        g, _ = simplify(rp.network)
        out.append(
            ReducedProblem(
                network=g,
                input_polytope=rp.input_polytope,
                input_shape=rp.input_shape,
                disjunct_index=rp.disjunct_index,
                atoms=rp.atoms,
            )
        )
    return bound, out


def _box_problem(rng, n=2, hidden=(3,)):
    net = random_dense_net(rng, n, 2, hidden=hidden)
    lo = ", ".join(["0"] * 1)
    src = 'N = Network("N")\nForall(x_, Implies(And(0 <= x_, x_ <= 1), N(x_)[0] > N(x_)[1]))'
    _, problems = _problem_from(src, net)
    return problems[0]


# --- to_layers ----------------------------------------------------------------


def test_to_layers_two_fc(rng):
    g = dense_net([(rng.normal(size=(3, 2)), rng.normal(size=3)),
                   (rng.normal(size=(2, 3)), rng.normal(size=2))], [2])
    layers = to_layers(g)
    assert [l.kind for l in layers] == ["fc", "fc"]
    assert layers[0].activation and not layers[1].activation


def test_to_layers_branching_rejected(rng):
    b = GraphBuilder()
    x = b.input([2])
    r1 = b.op("Relu", [x])
    r2 = b.op("Sigmoid", [x])
    cat = b.op("Concat", [r1, r2], axis=0)
    g = b.build([cat])
    with pytest.raises(NotSequential) as exc:
        to_layers(g)
    assert "branches" in str(exc.value)


def test_to_layers_conv_flatten_fc(rng):
    b = GraphBuilder()
    x = b.input([1, 1, 4, 4])
    c = b.op("Conv", [x, rng.normal(size=(2, 1, 3, 3)), rng.normal(size=2)])
    r = b.op("Relu", [c])
    f = b.op("Flatten", [r], axis=1)
    gm = b.op("Gemm", [f, rng.normal(size=(3, 8)), rng.normal(size=3)])
    g = b.build([gm])
    layers = to_layers(g)
    assert [l.kind for l in layers] == ["conv", "fc"]
    assert layers[0].activation and not layers[1].activation
    # layer replay equals the graph
    replay = layers_to_graph(layers, (1, 1, 4, 4))
    for _ in range(20):
        xv = rng.normal(size=(1, 1, 4, 4))
        a = infer(g, [xv])[0].data.reshape(-1)
        bvals = infer(replay, [xv])[0].data.reshape(-1)
        assert np.allclose(a, bvals, atol=1e-12)


def test_to_layers_rejects_conv_after_fc(rng):
    b = GraphBuilder()
    x = b.input([1, 4])
    gm = b.op("Gemm", [x, rng.normal(size=(8, 4)), rng.normal(size=8)])
    rl = b.op("Relu", [gm])
    rs = b.op("Reshape", [rl], shape=(1, 2, 2, 2))
    with pytest.raises(NotSequential):
        to_layers(b.build([b.op("Conv", [rs, rng.normal(size=(1, 2, 1, 1)), rng.normal(size=1)])]))


def test_to_layers_names_offending_node(rng):
    b = GraphBuilder()
    x = b.input([2])
    th = b.op("Tanh", [x])
    g = b.build([th])
    with pytest.raises(NotSequential) as exc:
        to_layers(g)
    assert "Tanh" in str(exc.value)


# --- NNET ---------------------------------------------------------------------


def test_nnet_round_trip(rng, tmp_path):
    rp = _box_problem(rng)
    path = tmp_path / "p.nnet"
    write_nnet(rp, path)
    graph, lo, hi = read_nnet(path)
    assert lo.tolist() == [0.0, 0.0] and hi.tolist() == [1.0, 1.0]
    for _ in range(50):
        x = rng.uniform(0, 1, size=2)
        a = infer(rp.network, [x])[0].data
        b = infer(graph, [x])[0].data
        assert np.abs(a - b).max() <= 1e-6


def test_nnet_requires_box(rng):
    rp = _box_problem(rng)
    tilted = HalfspacePolytope([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]], [1.0, 0.0, 0.0])
    rp2 = ReducedProblem(rp.network, tilted, rp.input_shape, 0)
    with pytest.raises(UnsupportedInput):
        write_nnet(rp2, "/tmp/never.nnet")


def test_nnet_requires_finite_box(rng):
    rp = _box_problem(rng)
    half = HalfspacePolytope([[1.0, 0.0]], [1.0])
    rp2 = ReducedProblem(rp.network, half, rp.input_shape, 0)
    with pytest.raises(UnsupportedInput):
        write_nnet(rp2, "/tmp/never.nnet")


def test_nnet_rejects_empty_network():
    b = GraphBuilder()
    x = b.input([2])
    g = b.build([x])
    rp = ReducedProblem(g, HalfspacePolytope([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
                                             [1.0, 0.0, 1.0, 0.0]), (2,), 0)
    with pytest.raises(InvalidGraph):
        write_nnet(rp, "/tmp/never.nnet")


def test_nnet_rejects_conv(rng):
    b = GraphBuilder()
    x = b.input([1, 1, 2, 2])
    c = b.op("Conv", [x, rng.normal(size=(2, 1, 2, 2)), rng.normal(size=2)])
    f = b.op("Flatten", [c], axis=1)
    g = b.build([f])
    box = HalfspacePolytope(np.vstack([np.eye(4), -np.eye(4)]), np.array([1.0] * 4 + [0.0] * 4))
    rp = ReducedProblem(g, box, (1, 1, 2, 2), 0)
    with pytest.raises(NotSequential):
        write_nnet(rp, "/tmp/never.nnet")


# --- RLV -----------------------------------------------------------------------


def test_rlv_line_counts_single_neuron(tmp_path):
    # y = 2x + 1 over the unit box: 1 Input, 1 Linear... plus the two
    # comparison outputs every reduced problem carries
    net = dense_net([(np.array([[2.0]]), np.array([1.0]))], [1])
    src = 'N = Network("N")\nForall(x_, Implies(And(0 <= x_, x_ <= 1), N(x_)[0] > 5))'
    _, problems = _problem_from(src, net)
    path = tmp_path / "p.rlv"
    write_rlv(problems[0], path)
    lines = path.read_text().splitlines()
    assert sum(1 for l in lines if l.startswith("Input")) == 1
    assert sum(1 for l in lines if l.startswith("Assert")) == 3  # two box rows + violation
    parsed = read_rlv(path)
    assert len(parsed["asserts"]) == 3


def test_rlv_polytope_rows_one_assert_each(rng, tmp_path):
    rp = _box_problem(rng)
    tilted = HalfspacePolytope(
        [[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]], [1.0, 0.0, 0.0]
    )
    rp2 = ReducedProblem(rp.network, tilted, rp.input_shape, 0)
    path = tmp_path / "p.rlv"
    write_rlv(rp2, path)
    lines = path.read_text().splitlines()
    assert sum(1 for l in lines if l.startswith("Assert")) == 4  # 3 rows + violation


def test_rlv_round_trip_inference(rng, tmp_path):
    rp = _box_problem(rng)
    path = tmp_path / "p.rlv"
    write_rlv(rp, path)
    parsed = read_rlv(path)
    outs = rlv_output_names(parsed)
    assert len(outs) == 2
    graph = rlv_to_graph(parsed)
    for _ in range(50):
        x = rng.uniform(-1, 2, size=2)
        direct = infer(rp.network, [x])[0].data.reshape(-1)
        values = rlv_evaluate(parsed, x)
        assert np.abs(direct - np.array([values[o] for o in outs])).max() <= 1e-6
        via_graph = infer(graph, [x])[0].data.reshape(-1)
        assert np.abs(direct - via_graph).max() <= 1e-6


def test_rlv_asserts_encode_polytope_and_violation(rng, tmp_path):
    rp = _box_problem(rng)
    path = tmp_path / "p.rlv"
    write_rlv(rp, path)
    parsed = read_rlv(path)
    outs = rlv_output_names(parsed)

    def asserts_hold(x):
        values = rlv_evaluate(parsed, x)
        ok = True
        for op, const, terms in parsed["asserts"]:
            total = sum(c * values[name] for c, name in terms)
            ok &= const <= total if op == "<=" else const >= total
        return ok

    for _ in range(200):
        x = rng.uniform(-0.5, 1.5, size=2)
        inside = bool(rp.input_polytope.contains(x))
        violated = rp.violated_at(x)
        assert asserts_hold(x) == (inside and violated)


# --- VNNLIB -----------------------------------------------------------------------


def test_vnnlib_assertion_counts(rng, tmp_path):
    rp = _box_problem(rng)  # n = 2 box
    onnx_path, prop_path = tmp_path / "p.onnx", tmp_path / "p.vnnlib"
    write_vnnlib(rp, onnx_path, prop_path)
    text = prop_path.read_text()
    assert text.count("(assert") == 5  # 4 box rows + 1 output condition
    n, m, A, b, outc = read_vnnlib(prop_path)
    assert n == 2 and m == 2
    assert A.shape == (4, 2)
    assert len(outc) == 1
    coeffs, bound = outc[0]
    assert coeffs.tolist() == [1.0, -1.0] and bound == 0.0  # Y_0 - Y_1 <= 0


def test_vnnlib_rejects_image_inputs(rng, tmp_path):
    b = GraphBuilder()
    x = b.input([1, 1, 2, 2])
    c = b.op("Conv", [x, rng.normal(size=(1, 1, 1, 1)), rng.normal(size=1)])
    g = b.build([c])
    box = HalfspacePolytope(np.vstack([np.eye(4), -np.eye(4)]), np.array([1.0] * 4 + [0.0] * 4))
    rp = ReducedProblem(g, box, (1, 1, 2, 2), 0)
    with pytest.raises(NonFlatTensors):
        write_vnnlib(rp, tmp_path / "x.onnx", tmp_path / "x.vnnlib")


def test_vnnlib_pair_reverified_by_ibp(rng, tmp_path):
    from verif.backends import ibp_verify
    from verif.onnx_io import parse_onnx

    net = random_dense_net(rng, 2, 2, hidden=(3,), input_rank1=False)
    src = 'N = Network("N")\nForall(x_, Implies(And(0 <= x_, x_ <= 1), N(x_)[0, 0] < 50))'
    _, problems = _problem_from(src, net)
    rp = problems[0]
    onnx_path, prop_path = tmp_path / "p.onnx", tmp_path / "p.vnnlib"
    write_vnnlib(rp, onnx_path, prop_path)
    graph, _ = parse_onnx(onnx_path)
    n, m, A, b, outc = read_vnnlib(prop_path)
    rebuilt = ReducedProblem(graph, HalfspacePolytope(A, b), tuple(graph.input_shapes[0]), 0)
    assert ibp_verify(rebuilt).status == ibp_verify(rp).status == "unsat"


# --- determinism ----------------------------------------------------------------


def test_writers_are_byte_deterministic(rng, tmp_path):
    rp = _box_problem(rng)
    pairs = []
    for i in (1, 2):
        write_nnet(rp, tmp_path / f"a{i}.nnet")
        write_rlv(rp, tmp_path / f"a{i}.rlv")
        write_vnnlib(rp, tmp_path / f"a{i}.onnx", tmp_path / f"a{i}.vnnlib")
    for ext in (".nnet", ".rlv", ".onnx", ".vnnlib"):
        b1 = (tmp_path / f"a1{ext}").read_bytes()
        b2 = (tmp_path / f"a2{ext}").read_bytes()
        assert b1 == b2, ext


# --- verifier output parsing --------------------------------------------------------


def test_parse_output_unsat():
    out = parse_verifier_output("generic", "UNSAT\n", 0)
    assert out.status == "unsat" and out.counterexample is None


def test_parse_output_garbage_with_exit_code():
    out = parse_verifier_output("generic", "segfault in solver core\n", 1)
    assert out.status == "error"
    assert "exit code 1" in out.reason


def test_parse_output_sat_with_counterexample_block():
    stdout = "some preamble\nSAT\n0.25, -1.5\n0.75\n\ntrailer text\n"
    out = parse_verifier_output("generic", stdout, 0)
    assert out.status == "sat"
    assert out.counterexample.data.tolist() == [0.25, -1.5, 0.75]


def test_parse_output_sat_without_counterexample_is_error():
    out = parse_verifier_output("generic", "SAT\n", 0)
    assert out.status == "error"


def test_parse_output_golden_fixture(tmp_path):
    golden = (
        "c parsing network\n"
        "c search depth 12\n"
        "sat\n"
        "x = [ 0.1250000000 0.8750000000 ]\n"
    )
    out = parse_verifier_output("generic", golden, 0)
    assert out.status == "sat"
    assert out.counterexample.data.tolist() == [0.125, 0.875]


def test_outcome_invariants_enforced():
    with pytest.raises(ValueError):
        VerifierOutcome("sat")
    with pytest.raises(ValueError):
        VerifierOutcome("unsat", counterexample=TensorValue([1.0]))
    with pytest.raises(ValueError):
        VerifierOutcome("unsat", reason="nope")
    with pytest.raises(ValueError):
        VerifierOutcome("error")
