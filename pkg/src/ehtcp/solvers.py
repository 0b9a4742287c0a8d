"""Solution finding for small EHTCP instances.

Three routes are provided:

* :func:`solve_all` enumerates complementarity patterns.  Each pattern pins
  one side of every min row to its boundary value, which leaves a square
  polynomial system in the remaining ``n`` unknowns; that system is solved
  by damped multistart Newton and the roots are filtered by the pattern's
  sign conditions.  Patterns whose system has a row of fixed sign on the
  feasible box are certified empty by interval evaluation.
* :func:`semismooth_newton` runs Newton on the stacked min-map residual with
  a branch-selected generalized Jacobian.
* :func:`continuation_solve` follows the homotopy ``q -> t q`` from ``t = 0``.

Nothing here proves emptiness except the interval certificate; a pattern
with no root at budget is reported as such and clears ``exhaustive``.
"""

from __future__ import annotations

import enum
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator

import numpy as np

from .problem_model import (
    CandidateSolution,
    EHTCPInstance,
    StackedMap,
    check_lemma31,
    is_solution,
)
from .tensor_core import interval_power

__all__ = [
    "Side",
    "Pattern",
    "SolverOptions",
    "PatternResult",
    "SolutionSet",
    "NewtonResult",
    "ContinuationResult",
    "enumerate_patterns",
    "solve_pattern",
    "solve_all",
    "semismooth_newton",
    "continuation_solve",
    "dedup_points",
]

MAX_PATTERN_BITS = 24


class Side(enum.IntEnum):
    """Which argument of a min row is pinned to its boundary value."""

    LEFT_ZERO = 0
    RIGHT_ZERO = 1


@dataclass(frozen=True)
class Pattern:
    """Branch tags, ``tags[p][i]`` for complementarity pair ``p`` and index ``i``.

    Pair 0 is ``(x_0, x_1)``; pair ``j >= 1`` is ``(d_j - x_j, x_{j+1})``.
    """

    tags: tuple[tuple[Side, ...], ...]

    @property
    def k(self) -> int:
        return len(self.tags)

    @property
    def n(self) -> int:
        return len(self.tags[0])

    def as_array(self) -> np.ndarray:
        return np.array(self.tags, dtype=int).reshape(-1)

    def __str__(self) -> str:
        return "|".join("".join("L" if t == Side.LEFT_ZERO else "R" for t in row)
                        for row in self.tags)


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-9
    dedup_tol: float = 1e-6
    starts_per_var: int = 8
    max_iter: int = 100
    step_floor: float = 1e-12
    seed: int = 0
    threads: int = 1
    max_pattern_bits: int = MAX_PATTERN_BITS
    snap_tol: float = 1e-3
    side_tol: float = 1e-12


@dataclass
class PatternResult:
    pattern: Pattern
    solutions: list[CandidateSolution]
    status: str
    starts: int = 0
    iterations: int = 0
    stalls: int = 0

    @property
    def settled(self) -> bool:
        return self.status in SETTLED


@dataclass
class SolutionSet:
    solutions: list[CandidateSolution]
    exhaustive: bool
    stats: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.solutions)

    def __iter__(self):
        return iter(self.solutions)

    def radius(self) -> float:
        if not self.solutions:
            return 0.0
        return max(float(np.max(np.abs(s.blocks))) for s in self.solutions)


@dataclass
class NewtonResult:
    success: bool
    solution: CandidateSolution | None
    iterations: int
    reason: str
    last: np.ndarray | None = None


@dataclass
class ContinuationPath:
    start: np.ndarray
    end: CandidateSolution | None
    last_t: float
    diverged: bool
    steps: int


@dataclass
class ContinuationResult:
    solutions: list[CandidateSolution]
    paths: list[ContinuationPath]

    def __len__(self) -> int:
        return len(self.solutions)

    def __iter__(self):
        return iter(self.solutions)


# Branch statuses. The first four count as settled for the exhaustive flag.
CONFLICT = "conflict"            # pins contradict each other or a side condition
CERTIFIED = "certified_empty"    # a tensor row has fixed sign on the feasible box
EXACT = "exact"                  # linear system solved directly
CONVERGED = "converged"          # multistart Newton reached at least one root
NO_ROOT = "no_root_at_budget"
SETTLED = frozenset({CONFLICT, CERTIFIED, EXACT, CONVERGED})


def enumerate_patterns(n: int, k: int, max_bits: int = MAX_PATTERN_BITS) -> Iterator[Pattern]:
    """All ``2^{n k}`` patterns, in lexicographic order of the flattened tags."""
    if n < 1 or k < 1:
        raise ValueError("n and k must be >= 1")
    if n * k > max_bits:
        raise ValueError(f"n*k = {n * k} exceeds the pattern budget guard of {max_bits}")
    for flat in itertools.product((Side.LEFT_ZERO, Side.RIGHT_ZERO), repeat=n * k):
        yield Pattern(tuple(tuple(flat[p * n:(p + 1) * n]) for p in range(k)))


# --------------------------------------------------------------------------
# batched damped Newton


def damped_newton(fun: Callable, Z0: np.ndarray, *, max_iter: int = 100,
                  step_floor: float = 1e-12, polish_tol: float = 1e-14):
    """Armijo-damped Gauss-Newton on a batch of starts.

    ``fun(Z)`` returns ``(F, J)`` with shapes ``(B, M)`` and ``(B, M, N)``.
    Steps use the pseudo-inverse so singular and non-square Jacobians give
    minimum-norm steps.  Returns ``(Z, res_inf, iterations, reason)`` where
    ``reason`` is 0 converged/running, 1 line-search stall, 2 singular.
    """
    Z = np.array(Z0, dtype=float, copy=True)
    B = Z.shape[0]
    iters = np.zeros(B, dtype=int)
    reason = np.zeros(B, dtype=int)
    F, J = fun(Z)
    for _ in range(max_iter):
        res = np.max(np.abs(F), axis=1) if F.shape[1] else np.zeros(B)
        active = (res > polish_tol) & (reason == 0) & np.all(np.isfinite(Z), axis=1)
        if not active.any():
            break
        idx = np.flatnonzero(active)
        Fa, Ja, Za = F[idx], J[idx], Z[idx]
        step = -np.einsum("bnm,bm->bn", np.linalg.pinv(Ja, rcond=1e-13), Fa)
        f0 = 0.5 * np.sum(Fa * Fa, axis=1)
        slope = -np.sum(np.einsum("bmn,bn->bm", Ja, step) ** 2, axis=1)
        singular = slope >= -1e-300
        reason[idx[singular]] = 2
        alpha = np.ones(idx.size)
        accepted = singular.copy()
        Znew, Fnew, Jnew = Za.copy(), Fa.copy(), Ja.copy()
        while not accepted.all():
            todo = np.flatnonzero(~accepted)
            trial = Za[todo] + alpha[todo, None] * step[todo]
            Ft, Jt = fun(trial)
            ft = 0.5 * np.sum(Ft * Ft, axis=1)
            ok = np.isfinite(ft) & (ft <= f0[todo] + 1e-4 * alpha[todo] * slope[todo])
            good = todo[ok]
            Znew[good], Fnew[good], Jnew[good] = trial[ok], Ft[ok], Jt[ok]
            accepted[good] = True
            bad = todo[~ok]
            alpha[bad] *= 0.5
            floor = bad[alpha[bad] < step_floor]
            reason[idx[floor]] = 1
            accepted[floor] = True
        moved = ~singular & (reason[idx] == 0)
        Z[idx[moved]] = Znew[moved]
        F[idx[moved]] = Fnew[moved]
        J[idx[moved]] = Jnew[moved]
        iters[idx[moved]] += 1
    res = np.max(np.abs(F), axis=1) if F.shape[1] else np.zeros(B)
    return Z, res, iters, reason


def dedup_points(points, tol: float) -> list[np.ndarray]:
    """Canonically sorted representatives at max-norm separation ``> tol``."""
    pts = [np.asarray(p, dtype=float) for p in points]
    if not pts:
        return []
    decimals = max(0, int(-np.floor(np.log10(tol))) + 1)
    # exact values break ties so the result does not depend on input order
    pts.sort(key=lambda p: (tuple(np.round(p.reshape(-1), decimals)), tuple(p.reshape(-1))))
    kept: list[np.ndarray] = []
    for p in pts:
        if all(np.max(np.abs(p - r)) > tol for r in kept):
            kept.append(p)
    return kept


# --------------------------------------------------------------------------
# branch systems (shared with the degree estimator)


@dataclass
class BranchSystem:
    """One smooth piece of a stacked map with pinned min-row sides."""

    smap: StackedMap
    branch: np.ndarray          # 0 = left side pinned, 1 = right side pinned
    row_target: np.ndarray      # right-hand side of the min rows
    tensor_target: np.ndarray   # right-hand side of the tensor block
    base: np.ndarray = None
    free: np.ndarray = None
    lo: np.ndarray = None
    hi: np.ndarray = None
    status: str | None = None

    def __post_init__(self):
        smap = self.smap
        N = smap.size
        base = np.zeros(N)
        pinned = np.zeros(N, dtype=bool)
        lo = np.full(N, -np.inf)
        hi = np.full(N, np.inf)
        for c in range(smap.n_min_rows):
            right = bool(self.branch[c])
            tgt = self.row_target[c]
            if right:
                const, coef, var = smap.right_const[c], smap.right_coef[c], smap.right_var[c]
                oconst, ocoef, ovar = smap.left_const[c], smap.left_coef[c], smap.left_var[c]
            else:
                const, coef, var = smap.left_const[c], smap.left_coef[c], smap.left_var[c]
                oconst, ocoef, ovar = smap.right_const[c], smap.right_coef[c], smap.right_var[c]
            value = (tgt - const) / coef
            if pinned[var] and abs(base[var] - value) > 1e-12 * (1 + abs(value)):
                self.status = CONFLICT
            pinned[var] = True
            base[var] = value
            bound = (tgt - oconst) / ocoef
            if ocoef > 0:
                lo[ovar] = max(lo[ovar], bound)
            else:
                hi[ovar] = min(hi[ovar], bound)
        eps = 1e-12 * (1 + np.abs(base))
        if np.any(pinned & ((base < lo - eps) | (base > hi + eps))) or np.any(lo > hi):
            self.status = self.status or CONFLICT
        self.base, self.free, self.lo, self.hi = base, np.flatnonzero(~pinned), lo, hi

    def full(self, Zfree: np.ndarray) -> np.ndarray:
        Z = np.broadcast_to(self.base, Zfree.shape[:-1] + self.base.shape).copy()
        Z[..., self.free] = Zfree
        return Z

    def reduced(self, Zfree):
        tup = self.smap.tuple
        X = self.full(Zfree).reshape(Zfree.shape[:-1] + (tup.k + 1, tup.n))
        F = tup.tensor_block(X) - self.tensor_target
        J = tup.tensor_block_jacobian(X)[..., self.free]
        return F, J

    def certify_empty(self) -> bool:
        """Interval test: some tensor row cannot vanish on the feasible box."""
        tup = self.smap.tuple
        n = tup.n
        box_lo = np.where(np.isin(np.arange(self.base.size), self.free), self.lo, self.base)
        box_hi = np.where(np.isin(np.arange(self.base.size), self.free), self.hi, self.base)
        lo, hi = interval_power(tup[0], box_lo[:n], box_hi[:n])
        for j in range(1, tup.k + 1):
            plo, phi = interval_power(tup[j], box_lo[j * n:(j + 1) * n], box_hi[j * n:(j + 1) * n])
            lo, hi = lo - phi, hi - plo
        lo, hi = lo - self.tensor_target, hi - self.tensor_target
        return bool(np.any((lo > 0) | (hi < 0)))

    def side_margin(self, Z) -> np.ndarray:
        """Per-row slack of the unpinned side, ``(other side) - target``."""
        L, R = self.smap.sides(Z)
        other = np.where(self.branch.astype(bool), L, R)
        return other - self.row_target


def solve_branch(system: BranchSystem, opts: SolverOptions, rng: np.random.Generator,
                 snap: bool = True):
    """Roots of a branch system that meet its side conditions.

    Returns ``(points, status, starts, iterations, stalls)``; ``points`` are
    flattened full-length vectors.
    """
    if system.status == CONFLICT:
        return [], CONFLICT, 0, 0, 0
    if system.certify_empty():
        return [], CERTIFIED, 0, 0, 0
    nfree = system.free.size
    tup = system.smap.tuple
    scale = max(float(np.max(np.abs(system.tensor_target), initial=0.0)),
                float(np.max(np.abs(system.base), initial=0.0)))
    if nfree == 0:
        F, _ = system.reduced(np.zeros((1, 0)))
        roots = np.zeros((1, 0)) if np.max(np.abs(F)) <= opts.tol else np.zeros((0, 0))
        status, starts, its, stalls = EXACT, 0, 0, 0
    elif tup.m == 2:
        F0, J0 = system.reduced(np.zeros((1, nfree)))
        J0, F0 = J0[0], F0[0]
        sol, *_ = np.linalg.lstsq(J0, -F0, rcond=None)
        rank = np.linalg.matrix_rank(J0)
        if rank == nfree:
            F1, _ = system.reduced(sol[None])
            roots = sol[None] if np.max(np.abs(F1)) <= opts.tol else np.zeros((0, nfree))
            status, starts, its, stalls = EXACT, 0, 0, 0
        else:
            roots, status, starts, its, stalls = _multistart(system, opts, rng, scale)
    else:
        roots, status, starts, its, stalls = _multistart(system, opts, rng, scale)

    points = []
    for zf in roots:
        if snap:
            zf = _snap(system, zf, opts)
        Z = system.full(zf)
        if np.all(system.side_margin(Z) >= -opts.side_tol):
            points.append(Z)
    return points, status, starts, its, stalls


def _multistart(system: BranchSystem, opts: SolverOptions, rng, scale):
    nfree = system.free.size
    m = system.smap.tuple.m
    starts = max(1, opts.starts_per_var * nfree)
    radius = 1.0 + scale ** (1.0 / (m - 1))
    Z0 = rng.standard_normal((starts, nfree)) * radius
    polish = 1e-14 * (1.0 + scale)
    Z, res, iters, reason = damped_newton(system.reduced, Z0, max_iter=opts.max_iter,
                                          step_floor=opts.step_floor, polish_tol=polish)
    ok = res <= opts.tol
    status = CONVERGED if ok.any() else NO_ROOT
    roots = np.array(dedup_points(Z[ok], opts.dedup_tol * 1e-3)).reshape(-1, nfree)
    return roots, status, starts, int(iters.sum()), int(np.count_nonzero(reason == 1))


def _snap(system: BranchSystem, zf: np.ndarray, opts: SolverOptions) -> np.ndarray:
    # roots of multiplicity > 1 at zero converge only linearly; pull them in
    small = np.abs(zf) <= opts.snap_tol
    if not small.any():
        return zf
    F, _ = system.reduced(zf[None])
    trial = np.where(small, 0.0, zf)
    Ft, _ = system.reduced(trial[None])
    if np.max(np.abs(Ft)) <= max(np.max(np.abs(F)), 1e-13):
        return trial
    return zf


# --------------------------------------------------------------------------
# pattern enumeration solver


def _pattern_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index)])


def solve_pattern(inst: EHTCPInstance, pattern: Pattern, opts: SolverOptions | None = None,
                  rng: np.random.Generator | None = None) -> PatternResult:
    """Solve the pinned polynomial system of one complementarity pattern."""
    opts = opts or SolverOptions()
    if (pattern.k, pattern.n) != (inst.k, inst.n):
        raise ValueError(f"pattern shape (k={pattern.k}, n={pattern.n}) does not match instance")
    rng = rng if rng is not None else np.random.default_rng(opts.seed)
    smap = StackedMap.psi_d(inst)
    system = BranchSystem(smap, pattern.as_array(), np.zeros(smap.n_min_rows), inst.q)
    points, status, starts, its, stalls = solve_branch(system, opts, rng)
    sols = []
    for Z in dedup_points(points, opts.dedup_tol):
        cand = CandidateSolution.evaluate(inst, Z, pattern=str(pattern))
        if cand.residual_inf <= opts.tol:
            sols.append(cand)
    return PatternResult(pattern, sols, status, starts, its, stalls)


def solve_all(inst: EHTCPInstance, opts: SolverOptions | None = None) -> SolutionSet:
    """Union of the pattern solutions, deduplicated at ``opts.dedup_tol``."""
    opts = opts or SolverOptions()
    if inst.n * inst.k > opts.max_pattern_bits:
        return _fallback_newton(inst, opts)
    patterns = list(enumerate_patterns(inst.n, inst.k, opts.max_pattern_bits))

    def run(item):
        index, pattern = item
        return solve_pattern(inst, pattern, opts, _pattern_rng(opts.seed, index))

    items = list(enumerate(patterns))
    if opts.threads > 1:
        with ThreadPoolExecutor(max_workers=opts.threads) as pool:
            results = list(pool.map(run, items))
    else:
        results = [run(it) for it in items]

    found = [s for r in results for s in r.solutions]
    by_key = {}
    for s in found:
        by_key.setdefault(s.blocks.tobytes(), s)
    reps = dedup_points([s.blocks for s in found], opts.dedup_tol)
    sols = [by_key[r.tobytes()] for r in reps]
    sols = [s for s in sols if is_solution(inst, s, opts.tol) and check_lemma31(inst, s)]
    counts: dict[str, int] = {}
    for r in results:
        counts[r.status] = counts.get(r.status, 0) + 1
    stats = {
        "patterns": len(results),
        "status_counts": counts,
        "newton_iterations": sum(r.iterations for r in results),
        "starts": sum(r.starts for r in results),
        "stalls": sum(r.stalls for r in results),
        "unsettled": [str(r.pattern) for r in results if not r.settled],
    }
    return SolutionSet(sols, all(r.settled for r in results), stats)


def _fallback_newton(inst: EHTCPInstance, opts: SolverOptions) -> SolutionSet:
    smap = StackedMap.psi_d(inst)
    N = smap.size
    rng = np.random.default_rng(opts.seed)
    starts = opts.starts_per_var * N
    radius = 1.0 + float(np.linalg.norm(inst.q)) ** (1.0 / (inst.m - 1))
    Z, res, iters, _ = _ssn_batch(smap, _target(inst), rng.standard_normal((starts, N)) * radius, opts)
    reps = dedup_points(Z[res <= opts.tol], opts.dedup_tol)
    sols = [CandidateSolution.evaluate(inst, z, method="semismooth") for z in reps]
    sols = [s for s in sols if is_solution(inst, s, opts.tol)]
    stats = {"patterns": 0, "starts": starts, "newton_iterations": int(iters.sum()),
             "note": "pattern budget exceeded; semismooth Newton multistart only"}
    return SolutionSet(sols, False, stats)


# --------------------------------------------------------------------------
# semismooth Newton and continuation


def _target(inst: EHTCPInstance, t: float = 1.0) -> np.ndarray:
    return np.concatenate([np.zeros(inst.k * inst.n), t * inst.q])


def _ssn_batch(smap: StackedMap, target: np.ndarray, Z0: np.ndarray, opts: SolverOptions):
    def fun(Z):
        return smap.evaluate(Z) - target, smap.jacobian(Z)

    polish = 1e-14 * (1.0 + float(np.max(np.abs(target), initial=0.0)))
    Z, res, iters, reason = damped_newton(fun, Z0, max_iter=opts.max_iter,
                                          step_floor=opts.step_floor, polish_tol=polish)
    return Z, res, iters, reason


_REASONS = {1: "line_search_failure", 2: "singular_generalized_jacobian"}


def semismooth_newton(inst: EHTCPInstance, start, opts: SolverOptions | None = None) -> NewtonResult:
    """Semismooth Newton on the stacked residual from one start point.

    At a kink (both arguments of a min equal) the left argument's derivative
    is used.
    """
    opts = opts or SolverOptions()
    if isinstance(start, CandidateSolution):
        start = start.blocks
    z0 = np.asarray(start, dtype=float).reshape(-1)
    if z0.size != inst.tuple.size:
        raise ValueError(f"start has {z0.size} components, expected {inst.tuple.size}")
    smap = StackedMap.psi_d(inst)
    Z, res, iters, reason = _ssn_batch(smap, _target(inst), z0[None], opts)
    ok = bool(res[0] <= opts.tol)
    if ok:
        return NewtonResult(True, CandidateSolution.evaluate(inst, Z[0], method="semismooth"),
                            int(iters[0]), "converged", Z[0])
    why = _REASONS.get(int(reason[0]), "max_iterations")
    if not np.all(np.isfinite(Z[0])):
        why = "diverged"
    return NewtonResult(False, None, int(iters[0]), why, Z[0])


def continuation_solve(inst: EHTCPInstance, steps: int = 20,
                       opts: SolverOptions | None = None, trust_radius: float = 1e8
                       ) -> ContinuationResult:
    """Trace ``Ψ(x) = (0, t q)`` from ``t = 0`` to ``t = 1``.

    The path leaves the (singular) start point ``x = 0`` through a seeded
    multistart at the first step ``t = 1/steps``; every distinct point found
    there is then advanced with warm-started semismooth Newton, halving the
    step on failure.  A path whose step falls below ``1/(64 steps)`` or that
    leaves the trust radius is reported as diverged at its last good ``t``.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    opts = opts or SolverOptions()
    N = inst.tuple.size
    if not np.any(inst.q):
        zero = CandidateSolution.evaluate(inst, np.zeros(N), method="continuation")
        return ContinuationResult([zero], [ContinuationPath(np.zeros(N), zero, 1.0, False, 0)])
    smap = StackedMap.psi_d(inst)
    m = inst.m
    h0 = 1.0 / steps
    rng = np.random.default_rng(opts.seed)
    qn = float(np.linalg.norm(inst.q))
    radius = h0 ** (1.0 / (m - 1)) * (1.0 + qn ** (1.0 / (m - 1)))
    Z0 = rng.standard_normal((opts.starts_per_var * N, N)) * radius
    Z, res, _, _ = _ssn_batch(smap, _target(inst, h0), Z0, opts)
    seeds = dedup_points(Z[res <= opts.tol], opts.dedup_tol)

    paths = []
    for seed_pt in seeds:
        t, z, h, count = h0, seed_pt, h0, 0
        diverged = False
        while t < 1.0:
            tn = min(1.0, t + h)
            pred = np.stack([z * (tn / t) ** (1.0 / (m - 1)), z])
            Zs, rs, _, _ = _ssn_batch(smap, _target(inst, tn), pred, opts)
            good = np.flatnonzero(rs <= opts.tol)
            if good.size and np.max(np.abs(Zs[good[0]])) <= trust_radius:
                best = good[np.argmin([np.max(np.abs(Zs[g] - pred[0])) for g in good])]
                t, z, count = tn, Zs[best], count + 1
                h = min(h0, 2 * h)
            else:
                h *= 0.5
                if h < h0 / 64:
                    diverged = True
                    break
        end = CandidateSolution.evaluate(inst, z, method="continuation") if not diverged else None
        if end is not None and not is_solution(inst, end, opts.tol):
            end, diverged = None, True
        paths.append(ContinuationPath(seed_pt, end, t, diverged, count))

    reps = dedup_points([p.end.blocks for p in paths if p.end is not None], opts.dedup_tol)
    return ContinuationResult([CandidateSolution.evaluate(inst, r, method="continuation")
                               for r in reps], paths)


def with_seed(opts: SolverOptions, seed: int) -> SolverOptions:
    return replace(opts, seed=seed)
