"""Command line interface: ``ehtcp <command> [options]``.

Exit codes: 0 success, 1 a checked claim failed, 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .class_analysis import ClassName, falsify, implies, propagate_witness
from .degree_lab import DegreeRefused, estimate_degree, verify_lemma_degsame
from .solvers import SolverOptions, continuation_solve, semismooth_newton, solve_all
from .workbench import (
    FAMILIES,
    SUITE_FIXTURES,
    InstanceFormatError,
    generate_instance,
    load_instance,
    run_paper_suite,
    serialize_instance,
    version,
)

EXIT_OK, EXIT_CLAIM, EXIT_INPUT = 0, 1, 2


class _InputError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=1e-9, help="solution tolerance (max-norm)")
    common.add_argument("--budget", type=float, default=1.0,
                        help="search budget; 1 means 200 restarts per class search")
    common.add_argument("--json", action="store_true", help="print the JSON report")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--out", help="also write the JSON report to this path")

    p = argparse.ArgumentParser(prog="ehtcp", parents=[common],
                                description="Solve and analyse extended horizontal TCPs.")
    p.add_argument("--version", action="version", version=f"ehtcp {version()}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="find solutions of an instance")
    s.add_argument("instance")
    s.add_argument("--method", choices=("patterns", "newton", "continuation"), default="patterns")
    s.add_argument("--steps", type=int, default=20, help="continuation steps")
    s.add_argument("--starts", type=int, default=50, help="random starts for --method newton")

    c = sub.add_parser("check", parents=[common], help="search for class witnesses")
    c.add_argument("instance")
    g = c.add_mutually_exclusive_group(required=True)
    g.add_argument("--class", dest="cls", help=", ".join(x.value for x in ClassName))
    g.add_argument("--all", action="store_true")

    h = sub.add_parser("hierarchy", parents=[common],
                       help="check that witnesses propagate along class inclusions")
    h.add_argument("instance")

    d = sub.add_parser("degree", parents=[common], help="estimate the degree of the stacked map")
    d.add_argument("instance")
    d.add_argument("--compare-d", action="store_true",
                   help="also count with the instance's d-map and compare")

    e = sub.add_parser("examples", parents=[common], help="run the worked-example suite")
    e.add_argument("--fixture", action="append", choices=sorted(SUITE_FIXTURES))
    e.add_argument("--timings", action="store_true")

    gen = sub.add_parser("gen", parents=[common], help="generate a random instance")
    gen.add_argument("--m", type=int, required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--k", type=int, default=1)
    gen.add_argument("--family", choices=FAMILIES, default="sparse-random")
    gen.add_argument("--nnz", type=int)
    return p


def _load(path: str):
    try:
        return load_instance(path)
    except OSError as e:
        raise _InputError(f"cannot read {path}: {e.strerror}") from None
    except (InstanceFormatError, ValueError) as e:
        raise _InputError(f"{path}: {e}") from None


def _opts(args) -> SolverOptions:
    if args.tol <= 0:
        raise _InputError("--tol must be positive")
    if args.budget <= 0:
        raise _InputError("--budget must be positive")
    if args.threads < 1:
        raise _InputError("--threads must be >= 1")
    return SolverOptions(tol=args.tol, seed=args.seed, threads=args.threads)


def _sol_dict(s) -> dict:
    return {"blocks": s.blocks.tolist(), "residual_inf": s.residual_inf}


def cmd_solve(args):
    inst = _load(args.instance)
    opts = _opts(args)
    rep = {"method": args.method}
    if args.method == "patterns":
        res = solve_all(inst, opts)
        rep.update(solutions=[_sol_dict(s) for s in res], exhaustive=res.exhaustive,
                   stats={k: v for k, v in res.stats.items() if k != "unsettled"},
                   unsettled=res.stats.get("unsettled", []))
    elif args.method == "newton":
        rng = np.random.default_rng(args.seed)
        found, reasons = [], {}
        for _ in range(args.starts):
            r = semismooth_newton(inst, rng.standard_normal(inst.tuple.size) * 2, opts)
            reasons[r.reason] = reasons.get(r.reason, 0) + 1
            if r.success and all(np.max(np.abs(r.solution.blocks - f.blocks)) > opts.dedup_tol
                                 for f in found):
                found.append(r.solution)
        found.sort(key=lambda s: tuple(np.round(s.flat, 9)))
        rep.update(solutions=[_sol_dict(s) for s in found], outcomes=reasons)
    else:
        res = continuation_solve(inst, args.steps, opts)
        rep.update(solutions=[_sol_dict(s) for s in res],
                   paths=[{"last_t": p.last_t, "diverged": p.diverged, "steps": p.steps}
                          for p in res.paths])
    text = [f"{len(rep['solutions'])} solution(s)"]
    if "exhaustive" in rep:
        text[0] += " (all patterns settled)" if rep["exhaustive"] else " (some patterns unsettled)"
    text += [f"  {s['blocks']}" for s in rep["solutions"]]
    return rep, text, EXIT_OK


def _verdict_text(v) -> str:
    line = f"{v.cls.value:12s} {v.status.value}"
    if v.witness is not None:
        line += f"  witness {np.round(v.witness.point, 6).tolist()}"
        if v.witness.partner is not None:
            line += f" / {np.round(v.witness.partner, 6).tolist()}"
    return line


def cmd_check(args):
    inst = _load(args.instance)
    _opts(args)
    if args.all:
        classes = list(ClassName)
    else:
        try:
            classes = [ClassName.parse(args.cls)]
        except ValueError as e:
            raise _InputError(str(e)) from None
    verdicts = [falsify(c, inst.tuple, args.budget, args.seed) for c in classes]
    rep = {"verdicts": [v.to_dict() for v in verdicts]}
    return rep, [_verdict_text(v) for v in verdicts], EXIT_OK


def cmd_hierarchy(args):
    inst = _load(args.instance)
    _opts(args)
    tup = inst.tuple
    verdicts = {c: falsify(c, tup, args.budget, args.seed) for c in ClassName}
    checks = []
    for a in ClassName:
        if not verdicts[a].refuted:
            continue
        for b in ClassName:
            if a == b or not implies(a, b, tup.k):
                continue
            w = propagate_witness(verdicts[a].witness, a, b, tup)
            checks.append({"from": a.value, "to": b.value, "valid": w is not None,
                           "target_refuted": verdicts[b].refuted})
    ok = all(c["valid"] and c["target_refuted"] for c in checks)
    rep = {"verdicts": [v.to_dict() for v in verdicts.values()], "propagation": checks,
           "consistent": ok}
    text = [_verdict_text(v) for v in verdicts.values()]
    text += [f"{c['from']} -> {c['to']}: {'ok' if c['valid'] and c['target_refuted'] else 'INCONSISTENT'}"
             for c in checks]
    return rep, text, EXIT_OK if ok else EXIT_CLAIM


def cmd_degree(args):
    inst = _load(args.instance)
    opts = _opts(args)
    try:
        if args.compare_d:
            agree, a, d = verify_lemma_degsame(inst.tuple, inst.d, args.seed, args.budget, opts=opts)
            rep = {"agree": agree, "psi_A": a.to_dict(), "psi_d": d.to_dict()}
            if agree:
                word = "agree"
            elif a.reliable and d.reliable:
                word = "DISAGREE"
            else:
                word = "inconclusive (a sweep was not exhaustive, nonsingular and kink-free)"
            text = [f"psi_A count {a.value}, psi_d count {d.value}: {word}"]
            return rep, text, EXIT_OK if agree else EXIT_CLAIM
        est = estimate_degree(inst.tuple, args.seed, args.budget, opts=opts)
    except DegreeRefused as e:
        return {"refused": str(e)}, [f"refused: {e}"], EXIT_OK
    rep = est.to_dict()
    flags = ", ".join(f"{k}={rep[k]}" for k in ("exhaustive", "nonsingular", "kink_free"))
    return rep, [f"degree estimate {est.value} ({flags})"], EXIT_OK


def cmd_examples(args):
    opts = _opts(args)
    rep = run_paper_suite(args.fixture, budget=args.budget, seed=args.seed, opts=opts,
                          timings=args.timings)
    text = [f"{'PASS' if c['passed'] else 'FAIL'}  {c['fixture']:16s} {c['claim']}"
            for c in rep["claims"]]
    n_ok = sum(c["passed"] for c in rep["claims"])
    text.append(f"{n_ok}/{len(rep['claims'])} claims passed")
    return rep, text, EXIT_OK if rep["passed"] else EXIT_CLAIM


def cmd_gen(args):
    try:
        inst = generate_instance(args.m, args.n, args.k, args.family, args.seed, args.nnz)
    except ValueError as e:
        raise _InputError(str(e)) from None
    body = serialize_instance(inst)
    return json.loads(body), [body], EXIT_OK


COMMANDS = {"solve": cmd_solve, "check": cmd_check, "hierarchy": cmd_hierarchy,
            "degree": cmd_degree, "examples": cmd_examples, "gen": cmd_gen}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        rep, text, code = COMMANDS[args.command](args)
    except _InputError as e:
        print(f"ehtcp: error: {e}", file=sys.stderr)
        return EXIT_INPUT
    if args.command != "gen":
        rep = {"command": args.command, "seed": args.seed, "version": version(), **rep}
    body = json.dumps(rep, indent=2, sort_keys=False)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(body + "\n")
    print(body if args.json else "\n".join(text))
    return code


if __name__ == "__main__":
    sys.exit(main())
