"""Instance files, random instances and the worked-example reproduction suite.

Instance files are JSON with 1-based tensor subscripts::

    {"m": 3, "n": 2, "k": 2,
     "tensors": [{"entries": [[[1, 2, 2], 1.0], [[2, 1, 1], 1.0]]}, ...],
     "d": [[1.0, 1.0]], "q": [1.0, 0.0], "label": "optional"}
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import fixtures as fx
from .class_analysis import (
    ClassName,
    componentwise_witnesses,
    falsify,
    injectivity_probe,
    odd_m_strong_witness,
    premise_residual,
)
from .degree_lab import DegreeRefused, estimate_degree, verify_lemma_degsame
from .problem_model import EHTCPInstance, TensorTuple, check_lemma31, is_solution, residual_psi_d
from .solvers import SolverOptions, semismooth_newton, solve_all
from .tensor_core import Tensor, identity_tensor

__all__ = [
    "InstanceFormatError",
    "parse_instance",
    "serialize_instance",
    "load_instance",
    "generate_instance",
    "FAMILIES",
    "run_paper_suite",
    "SUITE_FIXTURES",
    "version",
]


def version() -> str:
    try:
        from importlib.metadata import version as _v
        return _v("artifact")
    except Exception:
        return "0.1.0"


class InstanceFormatError(ValueError):
    """Malformed instance text; the message names the offending field."""


def _fail(path: str, msg: str):
    raise InstanceFormatError(f"{path}: {msg}")


def _int_field(obj: dict, key: str, minimum: int) -> int:
    if key not in obj:
        _fail(key, "missing required field")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        _fail(key, f"expected an integer, got {v!r}")
    if v < minimum:
        _fail(key, f"must be >= {minimum}, got {v}")
    return v


def _real_vector(v, path: str, n: int) -> list[float]:
    if not isinstance(v, list):
        _fail(path, f"expected a list of {n} numbers")
    if len(v) != n:
        _fail(path, f"expected {n} components, got {len(v)}")
    out = []
    for i, c in enumerate(v):
        if isinstance(c, bool) or not isinstance(c, (int, float)) or not math.isfinite(c):
            _fail(f"{path}[{i}]", f"expected a finite number, got {c!r}")
        out.append(float(c))
    return out


def parse_instance(text: str) -> EHTCPInstance:
    """Parse and validate an instance file."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise InstanceFormatError(f"line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(obj, dict):
        _fail("<root>", "expected a JSON object")
    m = _int_field(obj, "m", 2)
    n = _int_field(obj, "n", 1)
    k = _int_field(obj, "k", 1)
    tensors = obj.get("tensors")
    if not isinstance(tensors, list):
        _fail("tensors", "missing or not a list")
    if len(tensors) != k + 1:
        _fail("tensors", f"expected k+1 = {k + 1} tensors, got {len(tensors)}")
    built = []
    for t, tobj in enumerate(tensors):
        base = f"tensors[{t}]"
        if not isinstance(tobj, dict) or not isinstance(tobj.get("entries"), list):
            _fail(base, "expected an object with an 'entries' list")
        seen = set()
        entries = []
        for e, item in enumerate(tobj["entries"]):
            path = f"{base}.entries[{e}]"
            if not (isinstance(item, list) and len(item) == 2 and isinstance(item[0], list)):
                _fail(path, "expected [[i1, ..., im], value]")
            index, value = item
            if len(index) != m:
                _fail(path, f"index has {len(index)} components, expected m = {m}")
            for c in index:
                if isinstance(c, bool) or not isinstance(c, int):
                    _fail(path, f"index component {c!r} is not an integer")
                if not 1 <= c <= n:
                    _fail(path, f"index {index} out of range 1..{n}")
            if tuple(index) in seen:
                _fail(path, f"duplicate index {index}")
            seen.add(tuple(index))
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                _fail(path, f"coefficient {value!r} is not a finite number")
            entries.append((tuple(index), float(value)))
        built.append(Tensor.from_one_based(m, n, entries))
    d_obj = obj.get("d", [])
    if not isinstance(d_obj, list):
        _fail("d", "expected a list of vectors")
    if len(d_obj) != k - 1:
        _fail("d", f"expected k-1 = {k - 1} vectors, got {len(d_obj)}")
    d = [_real_vector(v, f"d[{j}]", n) for j, v in enumerate(d_obj)]
    for j, v in enumerate(d):
        for i, c in enumerate(v):
            if c <= 0:
                _fail(f"d[{j}][{i}]", f"{c!r} is not strictly positive")
    if "q" not in obj:
        _fail("q", "missing required field")
    q = _real_vector(obj["q"], "q", n)
    label = obj.get("label")
    if label is not None and not isinstance(label, str):
        _fail("label", "expected a string")
    return EHTCPInstance(TensorTuple(built), np.array(d).reshape(k - 1, n), np.array(q), label)


def instance_to_dict(inst: EHTCPInstance) -> dict:
    out = {
        "m": inst.m, "n": inst.n, "k": inst.k,
        "tensors": [{"entries": [[list(ix), v] for ix, v in t.one_based_entries()]}
                    for t in inst.tuple],
        "d": inst.d.tolist(),
        "q": inst.q.tolist(),
    }
    if inst.label is not None:
        out["label"] = inst.label
    return out


def serialize_instance(inst: EHTCPInstance) -> str:
    """Canonical JSON text; entries sorted lexicographically by index.

    Floats are written with ``repr`` precision, so parsing the text back
    reproduces the instance exactly.
    """
    return json.dumps(instance_to_dict(inst), indent=None, separators=(", ", ": "))


def load_instance(path: str) -> EHTCPInstance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())


# --------------------------------------------------------------------------
# random instances

FAMILIES = ("sparse-random", "diagonal", "identity-led")


def generate_instance(m: int, n: int, k: int, family: str = "sparse-random", seed: int = 0,
                      nnz: int | None = None) -> EHTCPInstance:
    """Deterministic random instance.

    ``sparse-random`` draws ``nnz`` (default ``2 n``) distinct positions per
    tensor with standard normal coefficients; ``diagonal`` puts coefficients
    from ``[0.5, 2]`` on ``a_{i..i}`` only; ``identity-led`` is sparse-random
    with ``A_0 = I``.  ``d`` is drawn from ``[0.5, 2]`` and ``q`` is standard
    normal.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}")
    if m < 2 or n < 1 or k < 1:
        raise ValueError(f"invalid shape m={m}, n={n}, k={k}")
    rng = np.random.default_rng([int(seed), m, n, k, FAMILIES.index(family)])
    size = n ** m
    s = min(size, 2 * n if nnz is None else int(nnz))

    def sparse() -> Tensor:
        flat = rng.choice(size, size=s, replace=False)
        idx = np.array(np.unravel_index(flat, (n,) * m)).T
        vals = rng.standard_normal(s)
        return Tensor(m, n, [(tuple(ix), v) for ix, v in zip(idx, vals)])

    def diagonal() -> Tensor:
        vals = rng.uniform(0.5, 2.0, n)
        return Tensor(m, n, [((i,) * m, vals[i]) for i in range(n)])

    if family == "diagonal":
        tensors = [diagonal() for _ in range(k + 1)]
    elif family == "identity-led":
        tensors = [identity_tensor(m, n)] + [sparse() for _ in range(k)]
    else:
        tensors = [sparse() for _ in range(k + 1)]
    d = rng.uniform(0.5, 2.0, (k - 1, n))
    q = rng.standard_normal(n)
    return EHTCPInstance(TensorTuple(tensors), d, q, f"{family}-m{m}-n{n}-k{k}-s{seed}")


# --------------------------------------------------------------------------
# reproduction suite


@dataclass
class _Ctx:
    seed: int
    budget: float
    opts: SolverOptions
    tuples: dict


def _unit(p) -> np.ndarray:
    p = np.asarray(p, dtype=float).reshape(-1)
    return p / np.linalg.norm(p)


def witness_in(verdict, point, tol: float = 1e-6) -> bool:
    """Whether ``point`` (up to positive scaling) is among a verdict's witnesses."""
    target = _unit(point)
    return any(np.max(np.abs(w.point.reshape(-1) / np.linalg.norm(w.point) - target)) <= tol
               for w in verdict.witnesses)


def _direction_in(vectors, direction, tol: float = 1e-6) -> bool:
    target = _unit(direction)
    return any(np.max(np.abs(v - target)) <= tol for v in vectors)


def _claims_ex31(c: _Ctx):
    tup = c.tuples["ex31"]
    ehe = falsify(ClassName.EHE, tup, c.budget, c.seed)
    r0 = falsify(ClassName.EHR0, tup, c.budget, c.seed)
    nd = falsify(ClassName.EHND, tup, c.budget, c.seed)
    yield "EHE refuted by ((-1,0),(1,0),(0,0))", ehe.refuted and witness_in(ehe, [[-1, 0], [1, 0], [0, 0]])
    yield "no EHR0 witness", not r0.refuted
    yield "no EHND witness", not nd.refuted
    yield "A_0 has an R0 witness along (0,1)", _direction_in(
        componentwise_witnesses(tup[0], "r0", c.budget, c.seed), [0, 1])
    for j in (1, 2):
        yield f"A_{j} has an R0 witness along (1,0)", _direction_in(
            componentwise_witnesses(tup[j], "r0", c.budget, c.seed), [1, 0])
    sols = solve_all(fx.homogeneous_instance(tup), c.opts)
    yield "q = 0 has only the zero solution", (
        sols.exhaustive and len(sols) == 1 and np.max(np.abs(sols.solutions[0].blocks)) <= c.opts.tol)


def _claims_ex32(c: _Ctx):
    tup = c.tuples["ex32"]
    for j in range(3):
        yield f"A_{j} has no non-degeneracy witness", not componentwise_witnesses(
            tup[j], "nd", c.budget, c.seed)
    w = [[1, 0], [0, 1], [0, 0]]
    for cls in (ClassName.EHND, ClassName.EHR0):
        v = falsify(cls, tup, c.budget, c.seed)
        yield f"{cls.value} refuted by ((1,0),(0,1),(0,0))", v.refuted and witness_in(v, w)


def _claims_ex33(c: _Ctx):
    tup = c.tuples["ex33"]
    for cls in (ClassName.EHND, ClassName.STRONG_EHND):
        yield f"no {cls.value} witness", not falsify(cls, tup, c.budget, c.seed).refuted
    v = falsify(ClassName.EHR0, tup, c.budget, c.seed)
    yield "EHR0 refuted by ((0,0),(1,1),(1,1))", v.refuted and witness_in(v, [[0, 0], [1, 1], [1, 1]])
    for j in range(3):
        yield f"A_{j} has a non-degeneracy witness", bool(
            componentwise_witnesses(tup[j], "nd", c.budget, c.seed))


def _claims_ex34(c: _Ctx):
    tup = c.tuples["ex34"]
    yield "no strong EHP witness", not falsify(ClassName.STRONG_EHP, tup, c.budget, c.seed).refuted
    inst = EHTCPInstance(tup, np.zeros((0, 2)), [1.0, 1.0])
    sols = solve_all(inst, c.opts)
    yield "q = (1,1) has the unique solution ((1,1),(0,0))", (
        sols.exhaustive and len(sols) == 1
        and np.max(np.abs(sols.solutions[0].blocks - [[1, 1], [0, 0]])) <= 1e-8)
    rng = np.random.default_rng([c.seed, 34])
    unique = True
    for _ in range(5):
        s = solve_all(inst.with_q(rng.uniform(-2, 2, 2)), c.opts)
        unique &= s.exhaustive and len(s) == 1
    yield "unique solution for random q", bool(unique)
    for j in range(2):
        yield f"x -> A_{j} x^3 shows no collision", injectivity_probe(tup[j], 200, c.seed) is None
    try:
        est = estimate_degree(tup, c.seed, c.budget, opts=c.opts)
        yield "degree is nonzero", est.reliable and est.value != 0
    except DegreeRefused:
        yield "degree is nonzero", False


def _claims_odd_m(c: _Ctx):
    tup = c.tuples["odd_m"]
    yield "no EHE witness", not falsify(ClassName.EHE, tup, c.budget, c.seed).refuted
    inst = EHTCPInstance(tup, np.zeros((0, tup.n)), [-1.0, -1.0])
    sols = solve_all(inst, c.opts)
    yield "q = (-1,-1) has no solution (all patterns settled)", sols.exhaustive and len(sols) == 0
    rng = np.random.default_rng([c.seed, 42])
    fails = all(not semismooth_newton(inst, rng.standard_normal((2, 2)) * 2, c.opts).success
                for _ in range(50))
    yield "semismooth Newton fails from 50 starts", fails
    yield "antipodal strong EHND witness is exact", odd_m_strong_witness(tup).premise_residual == 0.0


def _claims_infinite(c: _Ctx):
    tup = c.tuples["infinite"]
    inst = EHTCPInstance(tup, [[1.0, 1.0, 1.0]], [1.0, 0.0, 0.0])
    ok = True
    for theta in np.linspace(0, np.pi / 2, 5):
        x = np.zeros((3, 3))
        x[0, :2] = np.cos(theta), np.sin(theta)
        ok &= np.max(np.abs(residual_psi_d(inst, x))) <= 1e-12
    yield "cos/sin family solves q = (1,0,0)", bool(ok)
    sols = solve_all(inst, c.opts)
    yield "at least 3 distinct solutions", len(sols) >= 3
    yield "every solution satisfies x_0 ∧ x_i = 0", all(check_lemma31(inst, s) for s in sols)
    try:
        estimate_degree(tup, c.seed, c.budget, opts=c.opts)
        yield "degree computation is refused", False
    except DegreeRefused:
        yield "degree computation is refused", True


def _finite_oracle(q1: float, q2: float):
    """Closed-form cases of the finite example, filtered by their sign conditions.

    Case 1(d) (``x = 0``, ``y > 0``) eliminates ``y_2`` to a quadratic in
    ``u = y_1^3``: ``s^3 + (3 s^2 - q_1^2) u + (3 s - 2 q_1) u^2 = 0`` with
    ``s = q_1 + q_2``; its roots are checked against the original equations.
    """
    cbrt = np.cbrt
    cands = [
        ([0, 0], [0, 0], q1 == 0 and q2 == 0),
        ([0, 0], [cbrt(-q1), 0], cbrt(-q1) > 0 and q2 == 0),
        ([0, 0], [0, cbrt(0.5 * (q2 - q1))], cbrt(0.5 * (q2 - q1)) > 0 and q1 + q2 == 0),
        ([cbrt(q1 + q2), 0], [0, cbrt(q2)], q1 + q2 > 0 and q2 >= 0),
        ([0, cbrt(q2)], [cbrt(-q1), 0], q2 > 0 and q1 <= 0),
        ([cbrt(q1), cbrt(q2)], [0, 0], q1 > 0 and q2 > 0),
    ]
    s = q1 + q2
    for u in np.roots([3 * s - 2 * q1, 3 * s * s - q1 * q1, s ** 3]):
        if abs(u.imag) > 1e-12 or u.real <= 0:
            continue
        y1, y2 = cbrt(u.real), cbrt(-q1 - u.real)
        ok = y2 > 0 and abs(q2 - y2 ** 3 - y1 * y2 ** 2) <= 1e-9
        cands.append(([0, 0], [y1, y2], ok))
    out = []
    for x, y, ok in cands:
        p = np.array([x, y], dtype=float)
        if ok and all(np.max(np.abs(p - o)) > 1e-9 for o in out):
            out.append(p)
    return out


def _claims_finite(c: _Ctx):
    tup = c.tuples["finite"]
    v = falsify(ClassName.EHND, tup, c.budget, c.seed)
    yield "EHND refuted by ((0,0),(1,-1))", v.refuted and witness_in(v, [[0, 0], [1, -1]])
    inst = EHTCPInstance(tup, np.zeros((0, 2)), [1.0, 1.0])
    sols = solve_all(inst, c.opts)
    oracle = _finite_oracle(1.0, 1.0)
    match = len(sols) == len(oracle) == 2 and all(
        any(np.max(np.abs(s.blocks - o)) <= 1e-8 for s in sols) for o in oracle)
    yield "q = (1,1) has exactly the two closed-form solutions", match and sols.exhaustive


def _claims_finite_converse(c: _Ctx):
    tup = c.tuples["finite"]
    v = falsify(ClassName.STRONG_EHND, tup, c.budget, c.seed)
    yield "not strong EHND", v.refuted
    rng = np.random.default_rng([c.seed, 44])
    finite = True
    for _ in range(3):
        q = rng.uniform(-2, 2, 2)
        s = solve_all(EHTCPInstance(tup, np.zeros((0, 2)), q), c.opts)
        oracle = _finite_oracle(*q)
        finite &= len(s) == len(oracle) and all(
            any(np.max(np.abs(x.blocks - o)) <= 1e-8 for x in s) for o in oracle)
    yield "solution sets are finite and match the closed forms", bool(finite)


def _claims_hlcp(c: _Ctx):
    tup = c.tuples["hlcp"]
    try:
        est = estimate_degree(tup, c.seed, c.budget, opts=c.opts)
        yield "degree equals 1", est.reliable and est.value == 1
    except DegreeRefused:
        yield "degree equals 1", False
    agree, _, _ = verify_lemma_degsame(tup, np.zeros((0, tup.n)), c.seed, c.budget, opts=c.opts)
    yield "both stacked maps give the same count", agree
    inst = EHTCPInstance(tup, np.zeros((0, tup.n)), [1.0, -1.0])
    sols = solve_all(inst, c.opts)
    yield "x_0 = q + x_1 solved by the positive and negative parts of q", (
        len(sols) == 1 and np.max(np.abs(sols.solutions[0].blocks - [[1, 0], [0, 1]])) <= 1e-12)


SUITE_FIXTURES: dict[str, Callable] = {
    "ex31": _claims_ex31,
    "ex32": _claims_ex32,
    "ex33": _claims_ex33,
    "ex34": _claims_ex34,
    "odd_m": _claims_odd_m,
    "infinite": _claims_infinite,
    "finite": _claims_finite,
    "finite_converse": _claims_finite_converse,
    "hlcp": _claims_hlcp,
}


def run_paper_suite(fixtures=None, tuples=None, budget: float = 1.0, seed: int = 0,
                    opts: SolverOptions | None = None, timings: bool = False) -> dict:
    """Check every worked-example claim; returns a JSON-ready report.

    ``fixtures`` restricts the run to some fixture names; ``tuples`` overrides
    fixture tuples by name (used to perturb examples).  Timings are included
    only on request so that reports are reproducible byte for byte.
    """
    names = list(SUITE_FIXTURES) if fixtures is None else list(fixtures)
    for name in names:
        if name not in SUITE_FIXTURES:
            raise ValueError(f"unknown fixture {name!r}")
    tmap = {k: f() for k, f in fx.TUPLES.items()}
    tmap.update(tuples or {})
    ctx = _Ctx(seed, budget, opts or SolverOptions(seed=seed), tmap)
    claims, times = [], {}
    for name in names:
        t0 = time.perf_counter()
        for text, passed in SUITE_FIXTURES[name](ctx):
            claims.append({"fixture": name, "claim": text, "passed": bool(passed)})
        times[name] = round(time.perf_counter() - t0, 3)
    report = {
        "tool": "ehtcp",
        "version": version(),
        "seed": seed,
        "budget": budget,
        "claims": claims,
        "passed": all(c["passed"] for c in claims),
    }
    if timings:
        report["timings"] = times
    return report
