import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ehtcp import fixtures as fx
from ehtcp.cli import main
from ehtcp.solvers import solve_all
from ehtcp.tensor_core import apply_power, identity_tensor
from ehtcp.workbench import (
    FAMILIES,
    InstanceFormatError,
    generate_instance,
    parse_instance,
    run_paper_suite,
    serialize_instance,
)

EX31_TEXT = json.dumps({
    "m": 3, "n": 2, "k": 2,
    "tensors": [{"entries": [[[1, 2, 2], 1.0], [[2, 1, 1], 1.0]]},
                {"entries": [[[2, 1, 1], 1.0], [[1, 2, 2], -1.0]]},
                {"entries": [[[1, 2, 2], -1.0], [[2, 1, 1], 1.0]]}],
    "d": [[1.0, 1.0]], "q": [1.0, 0.0]})


def mutate(**changes):
    obj = json.loads(EX31_TEXT)
    obj.update(changes)
    return json.dumps(obj)


def test_parse_example_file():
    inst = parse_instance(EX31_TEXT)
    assert inst.tuple == fx.ex31_tuple()
    assert np.array_equal(apply_power(inst.tuple[0], [1.0, 2.0]), [4.0, 1.0])


@pytest.mark.parametrize("text, field", [
    (mutate(d=[[1.0, 0.0]]), r"d\[0\]\[1\]"),
    (mutate(d=[[1.0, -2.0]]), "strictly positive"),
    (mutate(tensors=[{"entries": [[[1, 3, 2], 1.0]]}, {"entries": []}, {"entries": []}]),
     r"tensors\[0\]\.entries\[0\].*out of range"),
    (mutate(tensors=[{"entries": []}]), "k\\+1"),
    (mutate(q=[1.0]), "q: expected 2"),
    (mutate(m=1), "m: must be >= 2"),
    (mutate(d=[]), "k-1"),
    (mutate(q=[1.0, "x"]), r"q\[1\]"),
    (mutate(tensors=[{"entries": [[[1, 1, 1], 1.0], [[1, 1, 1], 2.0]]}, {"entries": []},
                     {"entries": []}]), "duplicate"),
    ('{"m": 3,\n "n": 2,', "line 2"),
    ("[1, 2]", "JSON object"),
])
def test_parse_errors_name_the_field(text, field):
    with pytest.raises(InstanceFormatError, match=field):
        parse_instance(text)


@pytest.mark.parametrize("family", FAMILIES)
def test_round_trip_is_exact(family):
    for seed in range(5):
        inst = generate_instance(3, 2, 2, family, seed)
        text = serialize_instance(inst)
        back = parse_instance(text)
        assert back == inst
        assert np.array_equal(back.q, inst.q) and np.array_equal(back.d, inst.d)
        assert serialize_instance(back) == text


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=2, max_size=2))
def test_round_trip_keeps_every_bit(q):
    inst = fx.ex34_instance(q)
    assert parse_instance(serialize_instance(inst)).q.tobytes() == inst.q.tobytes()


def test_entry_order_is_canonical():
    obj = json.loads(EX31_TEXT)
    out = json.loads(serialize_instance(parse_instance(EX31_TEXT)))
    assert out["tensors"][1]["entries"] == [[[1, 2, 2], -1.0], [[2, 1, 1], 1.0]]
    assert obj["tensors"][1]["entries"][0][0] == [2, 1, 1]


def test_generator_is_deterministic():
    a = generate_instance(3, 3, 2, "sparse-random", 7)
    assert a == generate_instance(3, 3, 2, "sparse-random", 7)
    assert a != generate_instance(3, 3, 2, "sparse-random", 8)
    assert np.all((a.d >= 0.5) & (a.d <= 2.0))
    with pytest.raises(ValueError):
        generate_instance(1, 2, 1)
    with pytest.raises(ValueError):
        generate_instance(3, 2, 1, "dense")


def test_identity_led_m2_is_a_horizontal_lcp():
    inst = generate_instance(2, 2, 1, "identity-led", 0)
    assert inst.tuple[0] == identity_tensor(2, 2) and inst.m == 2 and inst.k == 1


def test_diagonal_family_is_solvable_for_nonnegative_q():
    rng = np.random.default_rng(0)
    for seed in range(6):
        inst = generate_instance(2 + seed % 3, 2, 1, "diagonal", seed)
        inst = inst.with_q(np.abs(rng.standard_normal(2)))
        assert len(solve_all(inst)) > 0


@pytest.fixture(scope="module")
def suite():
    return run_paper_suite()


def test_suite_passes_and_covers_nine_examples(suite):
    assert suite["passed"], [c for c in suite["claims"] if not c["passed"]]
    assert len({c["fixture"] for c in suite["claims"]}) == 9


def test_suite_detects_perturbation():
    rep = run_paper_suite(["ex33"], tuples={"ex33": fx.ex33_tuple(flip_a2=True)})
    assert not rep["passed"]
    assert any(not c["passed"] for c in rep["claims"])


def test_suite_is_idempotent(suite):
    again = run_paper_suite()
    assert json.dumps(again) == json.dumps(suite)
    with pytest.raises(ValueError):
        run_paper_suite(["nope"])


def run_cli(args, capsys):
    code = main(args)
    return code, capsys.readouterr()


@pytest.fixture
def ex34_file(tmp_path):
    p = tmp_path / "ex34.json"
    p.write_text(serialize_instance(fx.ex34_instance()))
    return str(p)


def test_cli_solve_is_deterministic(ex34_file, capsys):
    c1, o1 = run_cli(["solve", ex34_file, "--json", "--seed", "3"], capsys)
    c2, o2 = run_cli(["solve", ex34_file, "--json", "--seed", "3", "--threads", "2"], capsys)
    assert c1 == c2 == 0 and o1.out == o2.out
    rep = json.loads(o1.out)
    assert rep["command"] == "solve" and rep["seed"] == 3 and len(rep["solutions"]) == 1


@pytest.mark.parametrize("method", ["newton", "continuation"])
def test_cli_solve_methods(ex34_file, capsys, method):
    code, out = run_cli(["solve", ex34_file, "--method", method, "--json"], capsys)
    assert code == 0
    blocks = json.loads(out.out)["solutions"][0]["blocks"]
    assert np.allclose(blocks, [[1, 1], [0, 0]], atol=1e-9)


def test_cli_check_hierarchy_degree(ex34_file, tmp_path, capsys):
    code, out = run_cli(["check", ex34_file, "--class", "EHR0"], capsys)
    assert code == 0 and "NO_WITNESS_AT_BUDGET" in out.out
    code, out = run_cli(["hierarchy", ex34_file, "--budget", "0.25"], capsys)
    assert code == 0
    report = tmp_path / "deg.json"
    code, out = run_cli(["degree", ex34_file, "--out", str(report)], capsys)
    assert code == 0 and json.loads(report.read_text())["value"] == 1


def test_cli_gen_and_examples(tmp_path, capsys):
    code, out = run_cli(["gen", "--m", "3", "--n", "2", "--k", "2", "--seed", "4"], capsys)
    assert code == 0
    assert parse_instance(out.out) == generate_instance(3, 2, 2, seed=4)
    code, out = run_cli(["examples", "--fixture", "finite", "--fixture", "hlcp"], capsys)
    assert code == 0 and "claims passed" in out.out


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(mutate(d=[[0.0, 1.0]]))
    code, out = run_cli(["solve", str(bad)], capsys)
    assert code == 2 and "strictly positive" in out.err
    code, out = run_cli(["solve", str(tmp_path / "missing.json")], capsys)
    assert code == 2
    code, out = run_cli(["check", str(bad), "--class", "EHQ"], capsys)
    assert code == 2
    good = tmp_path / "inf.json"
    good.write_text(serialize_instance(fx.infinite_instance()))
    code, out = run_cli(["degree", str(good)], capsys)
    assert code == 0 and "refused" in out.out
    with pytest.raises(SystemExit) as err:
        main(["solve"])
    assert err.value.code == 2


def test_module_entry_point(ex34_file):
    res = subprocess.run([sys.executable, "-m", "ehtcp", "solve", ex34_file],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and "1 solution(s)" in res.stdout
