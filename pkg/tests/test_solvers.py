import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ehtcp import fixtures as fx
from ehtcp.problem_model import EHTCPInstance, check_lemma31, is_solution
from ehtcp.solvers import (
    CERTIFIED,
    SETTLED,
    Pattern,
    Side,
    SolverOptions,
    continuation_solve,
    dedup_points,
    enumerate_patterns,
    semismooth_newton,
    solve_all,
    solve_pattern,
)

L, R = Side.LEFT_ZERO, Side.RIGHT_ZERO
CBRT2 = 2.0 ** (1 / 3)


def contains(sols, blocks, tol=1e-8):
    return any(np.max(np.abs(s.blocks - np.asarray(blocks))) <= tol for s in sols)


def test_pattern_counts():
    assert len(list(enumerate_patterns(2, 1))) == 4
    pats = list(enumerate_patterns(3, 2))
    assert len(pats) == 64 and len(set(pats)) == 64
    assert [p.tags for p in enumerate_patterns(1, 1)] == [((L,),), ((R,),)]
    with pytest.raises(ValueError):
        next(enumerate_patterns(5, 5))
    with pytest.raises(ValueError):
        next(enumerate_patterns(0, 1))


def test_finite_example_single_patterns():
    inst = fx.finite_instance()
    res = solve_pattern(inst, Pattern(((R, R),)))
    assert len(res.solutions) == 1 and contains(res.solutions, [[1, 1], [0, 0]])
    res = solve_pattern(inst, Pattern(((R, L),)))
    assert contains(res.solutions, [[CBRT2, 0], [0, 1]])
    with pytest.raises(ValueError):
        solve_pattern(inst, Pattern(((R,),)))


def test_odd_m_patterns_are_all_empty():
    inst = fx.odd_m_instance()
    for p in enumerate_patterns(2, 1):
        res = solve_pattern(inst, p)
        assert res.solutions == [] and res.settled


def test_solve_all_examples():
    fin = solve_all(fx.finite_instance())
    assert len(fin) == 2 and fin.exhaustive
    assert contains(fin, [[CBRT2, 0], [0, 1]]) and contains(fin, [[1, 1], [0, 0]])

    inf = solve_all(fx.infinite_instance())
    assert len(inf) >= 3
    for s in inf:
        x = s.blocks
        assert abs(np.hypot(x[0, 0], x[0, 1]) - 1.0) <= 1e-8

    hom = solve_all(fx.homogeneous_instance(fx.ex31_tuple()))
    assert len(hom) == 1 and np.all(hom.solutions[0].blocks == 0)

    odd = solve_all(fx.odd_m_instance())
    assert len(odd) == 0 and odd.exhaustive
    assert set(odd.stats["status_counts"]) <= SETTLED
    assert odd.stats["status_counts"].get(CERTIFIED, 0) >= 1

    assert len(solve_all(fx.ex34_instance())) == 1


def test_semismooth_newton_examples():
    inst = fx.ex34_instance()
    r = semismooth_newton(inst, [[0.5, 0.5], [0.1, 0.1]])
    assert r.success and np.max(np.abs(r.solution.blocks - [[1, 1], [0, 0]])) <= 1e-9
    r = semismooth_newton(inst, [[1, 1], [0, 0]])
    assert r.success and r.iterations == 0

    rng = np.random.default_rng(3)
    odd = fx.odd_m_instance()
    results = [semismooth_newton(odd, rng.standard_normal(4) * 2) for _ in range(50)]
    assert not any(r.success for r in results)
    assert {r.reason for r in results} <= {"line_search_failure", "singular_generalized_jacobian",
                                           "max_iterations", "diverged"}
    with pytest.raises(ValueError):
        semismooth_newton(inst, np.zeros(3))


def test_continuation_examples():
    inst = fx.ex34_instance()
    res = continuation_solve(inst, 20)
    assert contains(res, [[1, 1], [0, 0]], 1e-9)

    zero = continuation_solve(fx.homogeneous_instance(fx.ex31_tuple()))
    assert len(zero) == 1 and not zero.solutions[0].blocks.any()

    inf = continuation_solve(fx.infinite_instance())
    assert len(inf) >= 1
    assert all(is_solution(fx.infinite_instance(), s, 1e-9) for s in inf)
    with pytest.raises(ValueError):
        continuation_solve(inst, 0)


@pytest.mark.parametrize("name", ["ex34", "finite", "hlcp"])
def test_continuation_agrees_with_enumeration(name):
    inst = {"ex34": fx.ex34_instance, "finite": fx.finite_instance,
            "hlcp": fx.hlcp_instance}[name]()
    full = solve_all(inst)
    for s in continuation_solve(inst):
        assert contains(full, s.blocks, 1e-6)


def test_thread_count_does_not_change_output():
    for inst in (fx.finite_instance(), fx.infinite_instance()):
        a = solve_all(inst, SolverOptions(seed=5, threads=1))
        b = solve_all(inst, SolverOptions(seed=5, threads=4))
        assert len(a) == len(b)
        for s, t in zip(a, b):
            assert np.array_equal(s.blocks, t.blocks)


def test_outputs_pass_solution_and_sign_checks():
    for inst in (fx.finite_instance(), fx.infinite_instance(), fx.ex34_instance(),
                 fx.hlcp_instance(), fx.homogeneous_instance(fx.ex33_tuple())):
        out = solve_all(inst)
        for s in out:
            assert is_solution(inst, s, 1e-9)
            assert check_lemma31(inst, s, 1e-7)
        if len(out) > 1:
            blocks = [s.flat for s in out]
            gaps = [np.max(np.abs(a - b)) for i, a in enumerate(blocks) for b in blocks[i + 1:]]
            assert min(gaps) >= 1e-6


def test_pattern_soundness():
    inst = fx.infinite_instance()
    for p in enumerate_patterns(3, 2):
        tags = np.array(p.tags)
        for s in solve_pattern(inst, p).solutions:
            x = s.blocks
            pinned_left = np.array([x[0], inst.d[0] - x[1]])
            pinned_right = np.array([x[1], x[2]])
            assert np.all(pinned_left[tags == L] == 0.0)
            assert np.all(pinned_right[tags == R] == 0.0)
            assert np.all(pinned_right[tags == L] >= -1e-12)
            assert np.all(pinned_left[tags == R] >= -1e-12)


def test_ex31_solution_radius_stays_bounded():
    tup = fx.ex31_tuple()
    rng = np.random.default_rng(11)
    radii = []
    for _ in range(50):
        q = rng.uniform(-1, 1, 2)
        q /= max(1.0, np.linalg.norm(q))
        radii.append(solve_all(EHTCPInstance(tup, [[1.0, 1.0]], q)).radius())
    assert max(radii) < 1e3


def test_ex34_is_uniquely_solvable():
    rng = np.random.default_rng(4)
    for _ in range(20):
        q = rng.uniform(-2, 2, 2)
        out = solve_all(fx.ex34_instance(q))
        assert len(out) == 1 and out.exhaustive


def test_dedup_is_order_independent():
    pts = [np.array([1.0, 0.0]), np.array([1.0 + 1e-9, 0.0]), np.array([0.0, 2.0])]
    a = dedup_points(pts, 1e-6)
    b = dedup_points(pts[::-1], 1e-6)
    assert len(a) == 2 and all(np.array_equal(x, y) for x, y in zip(a, b))


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(0.1, 3.0), min_size=2, max_size=2))
def test_hlcp_enumeration_matches_linear_oracle(q):
    # x_0 = q + x_1 with x_0 ∧ x_1 = 0 has the unique solution x_0 = q+, x_1 = q-
    q = np.array(q) * np.array([1.0, -1.0])
    out = solve_all(fx.hlcp_instance(q))
    assert len(out) == 1
    assert np.allclose(out.solutions[0].blocks, [np.maximum(q, 0), np.maximum(-q, 0)], atol=1e-12)
