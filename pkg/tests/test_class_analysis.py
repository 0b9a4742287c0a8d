import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ehtcp import fixtures as fx
from ehtcp.class_analysis import (
    ClassName,
    Status,
    componentwise_nondegenerate_witness,
    componentwise_r0_witness,
    componentwise_witnesses,
    falsify,
    implies,
    injectivity_probe,
    odd_m_strong_witness,
    premise_residual,
    propagate_witness,
)
from ehtcp.problem_model import TensorTuple
from ehtcp.tensor_core import Tensor, identity_tensor
from ehtcp.workbench import generate_instance, witness_in

C = ClassName
KNOWN_TUPLES = ["ex31", "ex32", "ex33", "ex34", "odd_m", "infinite", "finite", "hlcp"]


def random_tuples(count=20):
    out = []
    for s in range(count):
        m = (2, 3, 4)[s % 3]
        k = 1 + s % 2
        out.append(generate_instance(m, 2, k, "sparse-random", seed=s).tuple)
    return out


def unit_dir(v):
    v = np.asarray(v, dtype=float).reshape(-1)
    return v / np.linalg.norm(v)


def parallel(a, b, tol=1e-6):
    return np.max(np.abs(unit_dir(a) - unit_dir(b))) <= tol


def test_premise_residual_examples():
    assert premise_residual(C.EHE, fx.ex31_tuple(), [[-1, 0], [1, 0], [0, 0]]) == 0.0
    assert premise_residual(C.EHND, fx.ex32_tuple(), [[1, 0], [0, 1], [0, 0]]) == 0.0
    assert premise_residual(C.EHR0, fx.ex31_tuple(), [[1, 0], [1, 0], [0, 0]]) > 0.0
    assert premise_residual("ehr0", fx.ex33_tuple(), [[0, 0], [1, 1], [1, 1]]) == 0.0
    with pytest.raises(ValueError):
        premise_residual(C.EHP, fx.ex31_tuple(), np.zeros(5))


def test_class_names_parse():
    assert C.parse("strong-ehp") is C.STRONG_EHP
    assert C.parse("r0") is C.EHR0
    assert C.STRONG_EHND.strong and not C.EHE.strong
    with pytest.raises(ValueError, match="unknown class"):
        C.parse("EHQ")


def test_falsify_examples():
    ehe = falsify(C.EHE, fx.ex31_tuple())
    assert ehe.refuted and witness_in(ehe, [[-1, 0], [1, 0], [0, 0]])
    r0 = falsify(C.EHR0, fx.ex33_tuple())
    assert r0.refuted and witness_in(r0, [[0, 0], [1, 1], [1, 1]])
    assert falsify(C.EHR0, fx.ex31_tuple()).status == Status.NO_WITNESS_AT_BUDGET
    with pytest.raises(ValueError):
        falsify(C.EHR0, fx.ex31_tuple(), budget=0)


def test_verdicts_are_deterministic():
    a = falsify(C.EHP, fx.ex32_tuple(), 0.5, seed=9)
    b = falsify(C.EHP, fx.ex32_tuple(), 0.5, seed=9)
    assert a.to_dict() == b.to_dict()


def test_componentwise_witnesses():
    t31, t33 = fx.ex31_tuple(), fx.ex33_tuple()
    assert parallel(componentwise_r0_witness(t31[0]), [0, 1])
    assert any(parallel(x, [1, 0]) for x in componentwise_witnesses(t31[1], "r0"))
    assert componentwise_r0_witness(identity_tensor(3, 2)) is None
    assert any(parallel(x, [1, 0]) for x in componentwise_witnesses(t33[0], "nd"))
    assert componentwise_nondegenerate_witness(fx.ex32_tuple()[0]) is None
    assert componentwise_nondegenerate_witness(identity_tensor(4, 3)) is None
    with pytest.raises(ValueError):
        componentwise_witnesses(t31[0], "p")


def test_propagation_examples():
    t33 = fx.ex33_tuple()
    r0 = falsify(C.EHR0, t33)
    for target in (C.EHE, C.EHP):
        w = propagate_witness(r0.witness, C.EHR0, target, t33)
        assert w is not None and w.premise_residual == 0.0
    t32 = fx.ex32_tuple()
    nd = falsify(C.EHND, t32)
    w = propagate_witness(nd.witness, C.EHND, C.EHP, t32)
    assert w is not None and w.premise_residual <= 1e-9
    # an EHP witness with a strictly negative product is not an EHND witness
    ehp = falsify(C.EHP, fx.ex31_tuple())
    neg = next(v for v in ehp.witnesses if np.any(v.point[0] * v.point[1:] < -1e-3))
    assert propagate_witness(neg, C.EHP, C.EHND, fx.ex31_tuple()) is None
    # no inclusion in the reverse direction
    assert propagate_witness(w, C.EHP, C.EHR0, t32) is None


def test_implication_graph():
    assert implies(C.EHR0, C.EHP, 2) and implies(C.EHR0, C.STRONG_EHP, 2)
    assert implies(C.STRONG_EHND, C.STRONG_EHP, 2)
    assert not implies(C.EHP, C.EHR0, 2)
    assert not implies(C.EHR0, C.EHND, 2)
    assert implies(C.EHR0, C.EHND, 1)


def test_odd_m_strong_witness():
    for tup in (fx.ex31_tuple(), fx.odd_m_tuple(), fx.ex32_tuple(), fx.infinite_tuple()):
        w = odd_m_strong_witness(tup)
        assert w.premise_residual == 0.0 and w.norm_certificate >= 0.999
    w = odd_m_strong_witness(fx.ex31_tuple(), [1, 0])
    assert premise_residual(C.STRONG_EHND, fx.ex31_tuple(), w.as_pair()) == 0.0
    with pytest.raises(ValueError, match="odd m"):
        odd_m_strong_witness(fx.ex33_tuple())


def test_odd_m_tuples_are_never_strongly_nondegenerate():
    tups = [fx.ex31_tuple(), fx.odd_m_tuple()] + [t for t in random_tuples(6) if t.m % 2]
    for tup in tups:
        assert falsify(C.STRONG_EHND, tup, 0.25).refuted


def test_injectivity_probe():
    pair = injectivity_probe(fx.ex31_tuple()[0])
    assert pair is not None
    x, xb = pair
    assert np.linalg.norm(x - xb) >= 1e-3
    assert injectivity_probe(fx.ex34_tuple()[0]) is None
    assert injectivity_probe(identity_tensor(4, 2)) is None


@pytest.fixture(scope="module")
def hierarchy_verdicts():
    tups = [(name, fx.TUPLES[name]()) for name in KNOWN_TUPLES]
    tups += [(f"random{i}", t) for i, t in enumerate(random_tuples())]
    return [(name, tup, {c: falsify(c, tup, 0.25) for c in (C.EHR0, C.EHND, C.STRONG_EHND)})
            for name, tup in tups]


def test_witness_validity(hierarchy_verdicts):
    for _, tup, verdicts in hierarchy_verdicts:
        for cls, v in verdicts.items():
            if v.refuted:
                for w in v.witnesses:
                    assert premise_residual(cls, tup, w.as_pair()) <= 1e-9
                    assert w.norm_certificate >= 0.999


def test_hierarchy_consistency(hierarchy_verdicts):
    for name, tup, v in hierarchy_verdicts:
        if v[C.EHR0].refuted:
            for target in (C.EHE, C.EHP):
                assert propagate_witness(v[C.EHR0].witness, C.EHR0, target, tup) is not None, name
        if v[C.EHND].refuted:
            assert propagate_witness(v[C.EHND].witness, C.EHND, C.EHP, tup) is not None, name
        if v[C.STRONG_EHND].refuted:
            w = propagate_witness(v[C.STRONG_EHND].witness, C.STRONG_EHND, C.STRONG_EHP, tup)
            assert w is not None, name


def test_k1_r0_witnesses_are_nondegeneracy_witnesses(hierarchy_verdicts):
    # for k = 1, x_0 ∧ x_1 = 0 forces x_0 * x_1 = 0
    checked = 0
    for name, tup, v in hierarchy_verdicts:
        if tup.k == 1 and v[C.EHR0].refuted:
            for w in v[C.EHR0].witnesses:
                assert propagate_witness(w, C.EHR0, C.EHND, tup) is not None, name
                checked += 1
    assert checked > 0


def test_k1_nondegeneracy_witness_need_not_give_r0_witness():
    # A_0 x^3 = (x1^3 + x2^3, 0), A_1 y^3 = (-y1^3, y2^3): the pair x_0 = (1,-1),
    # x_1 = 0 meets the EHND premise but no sign change of it meets EHR0
    A0 = Tensor.from_one_based(4, 2, {(1, 1, 1, 1): 1, (1, 2, 2, 2): 1})
    A1 = Tensor.from_one_based(4, 2, {(1, 1, 1, 1): -1, (2, 2, 2, 2): 1})
    tup = TensorTuple([A0, A1])
    w = np.array([[1.0, -1.0], [0.0, 0.0]]) / np.sqrt(2)
    assert premise_residual(C.EHND, tup, w) == 0.0
    assert not falsify(C.EHR0, tup).refuted
    for signs in ([1, 1], [1, -1], [-1, 1], [-1, -1]):
        assert premise_residual(C.EHR0, tup, w * signs) > 0


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(list(C)), st.sampled_from(KNOWN_TUPLES), st.data())
def test_zero_set_is_scaling_invariant(cls, name, data):
    tup = fx.TUPLES[name]()
    v = falsify(cls, tup, 0.05)
    if v.refuted:
        w = data.draw(st.sampled_from(v.witnesses))
        pt = w.as_pair()
    else:
        n = tup.size * (2 if cls.strong else 1)
        z = np.array(data.draw(st.lists(st.floats(-1, 1), min_size=n, max_size=n)))
        pt = (z[:tup.size], z[tup.size:]) if cls.strong else z
    base = premise_residual(cls, tup, pt) <= 1e-9
    for t in (0.5, 2.0):
        scaled = tuple(t * np.asarray(p) for p in pt) if cls.strong else t * np.asarray(pt)
        r = premise_residual(cls, tup, scaled)
        if base and premise_residual(cls, tup, pt) == 0.0:
            assert r == 0.0
        if not base:
            assert r > 0.0
