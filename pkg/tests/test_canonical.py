"""Canonicalization: linear atoms, argmax lowering, elementwise expansion."""

import numpy as np
import pytest

from verif import parse_dnnp
from verif.errors import MixedAtom, NonlinearAtom, UnsupportedExpression
from verif.properties import bind, canonicalize, holds_at
from verif.properties.canonical import LinearAtom
from verif.properties.nodes import And, AtomExpr, BoolConst, Implies, Not, Or, walk

from conftest import dense_net, random_dense_net


def net_1_to_3():
    return dense_net([(np.array([[1.0], [2.0], [3.0]]), np.array([0.0, 0.0, 0.0]))], [1])


def net_2_to_2():
    return dense_net([(np.eye(2), np.zeros(2))], [2])


def canon(src, networks, params=None):
    prop, _, _ = parse_dnnp(src)
    return canonicalize(bind(prop, params or {}, networks))


def atoms_of(expr):
    return [n.atom for n in walk(expr) if isinstance(n, AtomExpr)]


# --- LinearAtom itself -------------------------------------------------------


def test_atom_requires_nonzero_coefficient():
    with pytest.raises(ValueError):
        LinearAtom("output", [0.0, 0.0], "<=", 1.0)


def test_atom_negation_flips_comparator():
    a = LinearAtom("output", [1.0], "<", 2.0)
    assert a.negated().op == ">="
    assert a.negated().negated() == a
    for op, want in (("<", ">="), ("<=", ">"), (">", "<="), (">=", "<")):
        assert LinearAtom("input", [1.0], op, 0.0).negated().op == want


def test_atom_satisfied_vectorized():
    a = LinearAtom("output", [1.0, -1.0], "<=", 0.0)
    ys = np.array([[1.0, 2.0], [2.0, 1.0]])
    assert a.satisfied(ys).tolist() == [True, False]


# --- argmax lowering ------------------------------------------------------------


def test_argmax_equality_lowered_to_strict_pairs():
    c = canon('N = Network("N")\nForall(x_, argmax(N(x_)) == 0)', {"N": net_1_to_3()})
    body = c.body
    assert isinstance(body, And) and len(body.children) == 2
    for child in body.children:
        assert isinstance(child, AtomExpr)
        assert child.atom.op == ">"
        assert child.atom.space == "output"
    # y0 > y1 and y0 > y2
    assert body.children[0].atom.coeffs.tolist() == [1.0, -1.0, 0.0]
    assert body.children[1].atom.coeffs.tolist() == [1.0, 0.0, -1.0]


def test_argmin_equality_uses_less_than():
    c = canon('N = Network("N")\nForall(x_, argmin(N(x_)) == 1)', {"N": net_1_to_3()})
    for child in c.body.children:
        assert child.atom.op == "<"


def test_argmax_inequality_wraps_not():
    c = canon('N = Network("N")\nForall(x_, argmax(N(x_)) != 2)', {"N": net_1_to_3()})
    assert isinstance(c.body, Not)


def test_argmax_out_of_range_folds_false():
    c = canon('N = Network("N")\nForall(x_, argmax(N(x_)) == 7)', {"N": net_1_to_3()})
    assert c.body == BoolConst(False)


def test_argmax_against_symbolic_argmax_rejected():
    with pytest.raises(UnsupportedExpression):
        canon('N = Network("N")\nForall(x_, argmax(N(x_)) == argmin(N(x_)))', {"N": net_1_to_3()})


# --- elementwise expansion --------------------------------------------------------


def test_box_on_vector_input_expands_to_four_atoms():
    c = canon('N = Network("N")\nForall(x_, Implies(0 <= x_ <= 1, N(x_)[0] > 0))', {"N": net_2_to_2()})
    input_atoms = [a for a in atoms_of(c.body) if a.space == "input"]
    assert len(input_atoms) == 4


def test_tensor_equality_lowers_to_le_ge_pairs():
    c = canon('N = Network("N")\nForall(x_, N(x_) == [0.5, 0.25])', {"N": net_2_to_2()})
    ats = atoms_of(c.body)
    assert len(ats) == 4
    assert {a.op for a in ats} == {"<=", ">="}


def test_tensor_disequality_lowers_to_strict_or():
    c = canon('N = Network("N")\nForall(x_, N(x_) != [0.5, 0.25])', {"N": net_2_to_2()})
    ors = [n for n in walk(c.body) if isinstance(n, Or)]
    assert len(ors) == 2
    ats = atoms_of(c.body)
    assert {a.op for a in ats} == {"<", ">"}


def test_affine_arithmetic_collected():
    c = canon(
        'N = Network("N")\nForall(x_, (2 * N(x_)[0] - N(x_)[1]) / 4 <= 3)',
        {"N": net_2_to_2()},
    )
    (atom,) = atoms_of(c.body)
    assert np.allclose(atom.coeffs, [0.5, -0.25])
    assert atom.op == "<=" and atom.rhs == 3.0


# --- rejections --------------------------------------------------------------------


def test_product_of_symbolic_terms_rejected():
    with pytest.raises(NonlinearAtom):
        canon('N = Network("N")\nForall(x_, Implies(x_ * x_ >= 0, N(x_)[0] > 0))', {"N": net_1_to_3()})


def test_symbolic_divisor_rejected():
    with pytest.raises(NonlinearAtom):
        canon('N = Network("N")\nForall(x_, Implies(1 / x_ >= 0, N(x_)[0] > 0))', {"N": net_1_to_3()})


def test_mixed_atom_rejected():
    with pytest.raises(MixedAtom):
        canon('N = Network("N")\nForall(x_, N(x_)[0] > x_[0])', {"N": net_2_to_2()})


def test_network_of_shifted_symbol_rejected():
    with pytest.raises(NonlinearAtom):
        canon('N = Network("N")\nForall(x_, N(x_ + 1)[0] > 0)', {"N": net_1_to_3()})


def test_tautology_folds_to_bool():
    c = canon('N = Network("N")\nForall(x_, Implies(N(x_)[0] <= N(x_)[0], N(x_)[0] > 0))',
              {"N": net_1_to_3()})
    assert isinstance(c.body, Implies)
    assert c.body.left == BoolConst(True)


def test_atom_spaces_partition():
    c = canon(
        'N = Network("N")\nForall(x_, Implies(And(x_ >= 0, x_ <= 1), N(x_)[0] + N(x_)[1] < 4))',
        {"N": net_2_to_2()},
    )
    for a in atoms_of(c.body):
        assert a.space in ("input", "output")


# --- semantics preserved -----------------------------------------------------------


def eval_canonical(body, x, y):
    """Truth of a canonical formula at concrete input/output vectors."""
    if isinstance(body, BoolConst):
        return body.value
    if isinstance(body, AtomExpr):
        v = x if body.atom.space == "input" else y
        return bool(body.atom.satisfied(v))
    if isinstance(body, And):
        return all(eval_canonical(c, x, y) for c in body.children)
    if isinstance(body, Or):
        return any(eval_canonical(c, x, y) for c in body.children)
    if isinstance(body, Not):
        return not eval_canonical(body.child, x, y)
    if isinstance(body, Implies):
        return (not eval_canonical(body.left, x, y)) or eval_canonical(body.right, x, y)
    raise TypeError(type(body))


PROPERTY_FAMILY = [
    'Forall(x_, Implies(And(0 <= x_, x_ <= 1), N(x_)[0] > N(x_)[1]))',
    'Forall(x_, Implies(And(-1 <= x_, x_ <= 1), Or(N(x_)[0] > 0.2, N(x_)[1] < 0.1)))',
    'Forall(x_, Implies(And(0.1 < x_, x_ < 0.9), argmax(N(x_)) == 0))',
    'Forall(x_, Implies(~(x_[0] > 0.5), N(x_)[0] + 2 * N(x_)[1] <= 1.5))',
    'Forall(x_, Implies(And(0 <= x_, x_ <= 1), N(x_) != [0.25, 0.25]))',
]


def test_canonicalization_preserves_semantics(rng):
    from verif.execute import infer

    for src_body in PROPERTY_FAMILY:
        net = random_dense_net(rng, 2, 2, hidden=(3,))
        src = f'N = Network("N")\n{src_body}'
        prop, _, _ = parse_dnnp(src)
        bound = bind(prop, {}, {"N": net})
        c = canonicalize(bound)
        for _ in range(200):
            x = rng.uniform(-1.5, 1.5, size=2)
            y = infer(net, [x])[0].data.reshape(-1)
            assert eval_canonical(c.body, x, y) == holds_at(bound, x), (src_body, x)
