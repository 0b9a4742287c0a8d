"""Falsification of the six structured tuple classes.

Each class is defined by an implication "premise system => point is zero"
(strong classes: "=> x equals x̄").  Membership is never proved here; a
search either finds a normalized point satisfying the premise (a witness,
which refutes membership) or reports that none was found at the budget.

The premise residual is a sum of squares: the tensor equation rows,
``min(x_0, x_i)`` rows, squared positive parts of sign violations and
Hadamard product rows.  It vanishes exactly on the premise set, and every
premise is invariant under joint positive scaling, so the search runs on
the unit sphere (strong classes: on ``‖x - x̄‖ = 1``).
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

import numpy as np

from .problem_model import TensorTuple
from .tensor_core import Tensor, apply_power, jacobian

__all__ = [
    "ClassName",
    "Status",
    "Witness",
    "ClassVerdict",
    "premise_residual",
    "falsify",
    "falsify_all",
    "componentwise_r0_witness",
    "componentwise_nondegenerate_witness",
    "componentwise_witnesses",
    "propagate_witness",
    "implies",
    "odd_m_strong_witness",
    "injectivity_probe",
    "WITNESS_TOL",
]

WITNESS_TOL = 1e-9
STARTS_PER_BUDGET = 200
MAX_LATTICE = 3 ** 9
MAX_WITNESSES = 32
MAX_LATTICE_WITNESSES = 1024


class ClassName(str, enum.Enum):
    EHR0 = "EHR0"
    EHP = "EHP"
    STRONG_EHP = "STRONG_EHP"
    EHE = "EHE"
    EHND = "EHND"
    STRONG_EHND = "STRONG_EHND"

    @property
    def strong(self) -> bool:
        return self in (ClassName.STRONG_EHP, ClassName.STRONG_EHND)

    @classmethod
    def parse(cls, name: str) -> "ClassName":
        key = name.strip().upper().replace("-", "_").replace(" ", "_")
        key = {"R0": "EHR0", "EHR_0": "EHR0", "STRONGEHP": "STRONG_EHP",
               "STRONGEHND": "STRONG_EHND"}.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown class {name!r}; expected one of "
                             f"{', '.join(c.value for c in cls)}") from None


class Status(str, enum.Enum):
    REFUTED = "REFUTED"
    NO_WITNESS_AT_BUDGET = "NO_WITNESS_AT_BUDGET"


@dataclass(frozen=True)
class Witness:
    """A normalized point satisfying a class premise.

    ``point`` has shape ``(k+1, n)``; for strong classes ``partner`` is the
    second point ``x̄`` of the pair.
    """

    point: np.ndarray
    partner: np.ndarray | None
    premise_residual: float
    norm_certificate: float

    def as_pair(self):
        return self.point if self.partner is None else (self.point, self.partner)


@dataclass
class ClassVerdict:
    cls: ClassName
    status: Status
    witness: Witness | None
    budget: float
    starts: int
    witnesses: list[Witness] = field(default_factory=list)

    @property
    def refuted(self) -> bool:
        return self.status == Status.REFUTED

    def to_dict(self) -> dict:
        out = {"class": self.cls.value, "status": self.status.value,
               "budget": self.budget, "starts": self.starts}
        if self.witness is not None:
            w = self.witness
            out["witness"] = {"point": w.point.tolist(),
                              "premise_residual": w.premise_residual,
                              "norm_certificate": w.norm_certificate}
            if w.partner is not None:
                out["witness"]["partner"] = w.partner.tolist()
        return out


# --------------------------------------------------------------------------
# premise residual terms


def _selector(k1: int, n: int, block: int, strong: bool) -> np.ndarray:
    """d(block of U)/dZ where U = X (plain) or X - X̄ (strong)."""
    N = k1 * n
    E = np.zeros((n, 2 * N if strong else N))
    E[np.arange(n), block * n + np.arange(n)] = 1.0
    if strong:
        E[np.arange(n), N + block * n + np.arange(n)] = -1.0
    return E


def _terms(cls: ClassName, tup: TensorTuple, Z: np.ndarray, with_jac: bool = True):
    """Residual rows ``r`` (B, R) and Jacobians (B, R, V) of a class premise."""
    k1, n = tup.k + 1, tup.n
    N = k1 * n
    B = Z.shape[0]
    strong = cls.strong
    X = Z[:, :N].reshape(B, k1, n)
    if strong:
        Xb = Z[:, N:].reshape(B, k1, n)
        U = X - Xb
        T = tup.tensor_block(X) - tup.tensor_block(Xb)
        JT = np.concatenate([tup.tensor_block_jacobian(X), -tup.tensor_block_jacobian(Xb)], -1) \
            if with_jac else None
    else:
        U = X
        T = tup.tensor_block(X)
        JT = tup.tensor_block_jacobian(X) if with_jac else None
    E = [_selector(k1, n, b, strong) for b in range(k1)]
    rows, jacs = [T], [JT]

    def add(val, jac):
        rows.append(val)
        jacs.append(jac)

    u0 = U[:, 0]
    if cls == ClassName.EHR0:
        for i in range(1, k1):
            ui = U[:, i]
            pick = (ui < u0)[..., None]
            add(np.minimum(u0, ui), np.where(pick, E[i], E[0]) if with_jac else None)
    elif cls in (ClassName.EHP, ClassName.EHE, ClassName.STRONG_EHP):
        for i in range(1, k1):
            ui = U[:, i]
            p = u0 * ui
            act = (p > 0)[..., None]
            add(np.maximum(p, 0.0),
                act * (ui[..., None] * E[0] + u0[..., None] * E[i]) if with_jac else None)
        if cls == ClassName.EHE:
            for i in range(1, k1):
                ui = U[:, i]
                act = (ui < 0)[..., None]
                add(np.maximum(-ui, 0.0), -(act * E[i]) if with_jac else None)
    else:
        for i, j in itertools.combinations(range(k1), 2):
            ui, uj = U[:, i], U[:, j]
            add(ui * uj, (uj[..., None] * E[i] + ui[..., None] * E[j]) if with_jac else None)
    r = np.concatenate(rows, axis=1)
    J = np.concatenate(jacs, axis=1) if with_jac else None
    return r, J, U.reshape(B, N)


def _pack(cls: ClassName, tup: TensorTuple, point) -> np.ndarray:
    N = tup.size
    if cls.strong:
        if isinstance(point, Witness):
            x, xb = point.point, point.partner if point.partner is not None else 0 * point.point
        elif isinstance(point, tuple) and len(point) == 2:
            x, xb = point
        else:
            arr = np.asarray(point, dtype=float)
            if arr.size == 2 * N:
                x, xb = arr.reshape(2, N)
            else:
                x, xb = arr, np.zeros(N)
        return np.concatenate([np.asarray(x, float).reshape(-1), np.asarray(xb, float).reshape(-1)])
    if isinstance(point, Witness):
        point = point.point
    z = np.asarray(point, dtype=float).reshape(-1)
    if z.size != N:
        raise ValueError(f"point has {z.size} components, expected {N}")
    return z


def premise_residual(cls, tup: TensorTuple, point) -> float:
    """Sum of squared premise violations of ``point`` for class ``cls``.

    For strong classes ``point`` is a pair ``(x, x̄)``; a single point is
    paired with ``x̄ = 0``.  No normalization is applied.
    """
    cls = ClassName.parse(cls) if isinstance(cls, str) else cls
    Z = _pack(cls, tup, point)[None]
    r, _, _ = _terms(cls, tup, Z, with_jac=False)
    return float(np.sum(r * r))


# --------------------------------------------------------------------------
# search


def _normalize(Z: np.ndarray, N: int, strong: bool) -> np.ndarray:
    if strong:
        s = np.linalg.norm(Z[:, :N] - Z[:, N:], axis=1)
    else:
        s = np.linalg.norm(Z, axis=1)
    s = np.where(s > 0, s, 1.0)
    return Z / s[:, None]


def _lm(resfun, Z0, N, strong, *, max_iter=200, radius=np.inf, ftol=1e-26, stall_floor=1e-12):
    """Batched Levenberg-Marquardt on the normalization manifold.

    ``resfun(Z)`` gives ``(r, J, U)`` where ``U`` is the normalized quantity
    (the point, or the difference of the pair).  A row ``(‖U‖² - 1)`` keeps
    steps tangent; iterates are renormalized after every accepted step.
    Starts that fail to halve their residual over ten iterations while it
    is above ``stall_floor`` are abandoned.
    """
    Z = _normalize(np.array(Z0, dtype=float), N, strong)
    B, V = Z.shape
    lam = np.full(B, 1e-3)
    alive = np.ones(B, dtype=bool)
    escaped = np.zeros(B, dtype=bool)
    r, J, U = resfun(Z)
    f = np.sum(r * r, axis=1)
    eye = np.eye(V)
    checkpoint = f.copy()
    for it in range(max_iter):
        if it and it % 10 == 0:
            # stuck at a positive local minimum: drop it
            alive &= ~((f > stall_floor) & (f > 0.5 * checkpoint))
            checkpoint = f.copy()
        act = np.flatnonzero(alive & (f > ftol))
        if act.size == 0:
            break
        ra, Ja, Ua = r[act], J[act], U[act]
        if strong:
            gU = np.concatenate([2 * Ua, -2 * Ua], axis=1)
        else:
            gU = 2 * Ua
        Jn = np.concatenate([Ja, gU[:, None, :]], axis=1)
        rn = np.concatenate([ra, np.zeros((act.size, 1))], axis=1)
        H = np.einsum("brv,brw->bvw", Jn, Jn)
        g = np.einsum("brv,br->bv", Jn, rn)
        diag = np.einsum("bvv->bv", H)
        A = H + lam[act, None, None] * (eye + diag[:, :, None] * eye)
        step = -np.linalg.solve(A, g[..., None])[..., 0]
        trial = _normalize(Z[act] + step, N, strong)
        rt, Jt, Ut = resfun(trial)
        ft = np.sum(rt * rt, axis=1)
        ok = np.isfinite(ft) & (ft < f[act])
        good = act[ok]
        Z[good], r[good], J[good], U[good], f[good] = trial[ok], rt[ok], Jt[ok], Ut[ok], ft[ok]
        lam[good] = np.maximum(lam[good] / 3.0, 1e-12)
        lam[act[~ok]] *= 4.0
        alive[act[lam[act] > 1e10]] = False
        if np.isfinite(radius):
            escaped |= np.max(np.abs(Z), axis=1) > radius
            alive &= ~escaped
    return Z, f, ~escaped


def _lattice(N: int, limit: int = MAX_LATTICE) -> np.ndarray:
    if 3 ** N > limit:
        return np.zeros((0, N))
    pts = np.array(list(itertools.product((0.0, 1.0, -1.0), repeat=N)))[1:]
    order = np.argsort(np.count_nonzero(pts, axis=1), kind="stable")
    return pts[order]


def _witness_list(cls, tup, Z, f, N, tol, cap=MAX_WITNESSES) -> list[Witness]:
    out: list[Witness] = []
    kept = np.zeros((0, Z.shape[1]))
    for z, val in zip(Z, f):
        if not (val <= tol):
            continue
        z = _clean(z)
        res = premise_residual(cls, tup, (z[:N], z[N:]) if cls.strong else z)
        if res > tol:
            continue
        if kept.size and np.min(np.max(np.abs(kept - z), axis=1)) <= 1e-6:
            continue
        kept = np.vstack([kept, z])
        cert = float(np.linalg.norm(z[:N] - z[N:]) if cls.strong else np.linalg.norm(z))
        x = z[:N].reshape(tup.k + 1, tup.n)
        xb = z[N:].reshape(tup.k + 1, tup.n) if cls.strong else None
        out.append(Witness(x, xb, res, cert))
        if len(out) >= cap:
            break
    return out


def _flat(w: Witness) -> np.ndarray:
    if w.partner is None:
        return w.point.reshape(-1)
    return np.concatenate([w.point.reshape(-1), w.partner.reshape(-1)])


def _clean(z: np.ndarray) -> np.ndarray:
    # round-off below 1e-12 only obscures which components vanish
    return np.where(np.abs(z) < 1e-12, 0.0, z)


def _seeds(cls: ClassName, tup: TensorTuple) -> np.ndarray:
    N = tup.size
    lat = _lattice(N)
    if not cls.strong:
        return lat
    seeds = []
    if tup.m % 2 == 1:
        for i in range(tup.n):
            for s in (1.0, -1.0):
                x = np.zeros(N)
                x[i] = 0.5 * s
                seeds.append(np.concatenate([x, -x]))
    seeds.extend(np.concatenate([p, np.zeros(N)]) for p in lat)
    return np.array(seeds).reshape(-1, 2 * N)


def falsify(cls, tup: TensorTuple, budget: float = 1.0, seed: int = 0,
            tol: float = WITNESS_TOL, escape_radius: float = 10.0) -> ClassVerdict:
    """Search for a premise witness of ``cls`` for ``tup``.

    ``budget = 1`` means 200 random restarts.  Deterministic seeds run first:
    the nonzero points of ``{-1, 0, 1}^N`` in order of support size (when
    ``3^N`` is small), and for strong classes the antipodal pairs that exist
    for odd ``m``.  Strong searches discard iterates leaving the box of
    half-width ``escape_radius``; premises on differences admit spurious
    near-witnesses at infinity.
    """
    cls = ClassName.parse(cls) if isinstance(cls, str) else cls
    if budget <= 0:
        raise ValueError("budget must be positive")
    N = tup.size
    V = 2 * N if cls.strong else N

    def resfun(Z):
        return _terms(cls, tup, Z)

    seeds = _seeds(cls, tup)
    starts = max(1, int(round(STARTS_PER_BUDGET * budget)))
    rng = np.random.default_rng([int(seed), list(ClassName).index(cls)])
    if cls.strong:
        xb = rng.standard_normal((starts, N))
        Z0 = np.concatenate([xb + rng.standard_normal((starts, N)), xb], axis=1)
    else:
        Z0 = rng.standard_normal((starts, V))
    radius = escape_radius if cls.strong else np.inf

    witnesses: list[Witness] = []
    if seeds.size:
        Zs, fs, _ = _lm(resfun, seeds, N, cls.strong, max_iter=0)
        witnesses = _witness_list(cls, tup, Zs, fs, N, tol, MAX_LATTICE_WITNESSES)
        if not witnesses:
            Zs, fs, oks = _lm(resfun, seeds, N, cls.strong, radius=radius)
            witnesses = _witness_list(cls, tup, Zs[oks], fs[oks], N, tol)
    Z, f, ok = _lm(resfun, Z0, N, cls.strong, radius=radius)
    extra = 0
    for w in _witness_list(cls, tup, Z[ok], f[ok], N, tol):
        if extra >= MAX_WITNESSES:
            break
        extra += 1
        if all(np.max(np.abs(_flat(w) - _flat(v))) > 1e-6 for v in witnesses):
            witnesses.append(w)
    total = starts + len(seeds)
    if witnesses:
        return ClassVerdict(cls, Status.REFUTED, witnesses[0], budget, total, witnesses)
    return ClassVerdict(cls, Status.NO_WITNESS_AT_BUDGET, None, budget, total, [])


def falsify_all(tup: TensorTuple, budget: float = 1.0, seed: int = 0) -> dict:
    return {c: falsify(c, tup, budget, seed) for c in ClassName}


# --------------------------------------------------------------------------
# single-tensor witnesses


def componentwise_witnesses(A: Tensor, kind: str, budget: float = 1.0, seed: int = 0,
                            tol: float = WITNESS_TOL) -> list[np.ndarray]:
    """Unit vectors with ``x ∧ A x^{m-1} = 0`` (``kind="r0"``) or
    ``x * A x^{m-1} = 0`` (``kind="nd"``), to ``tol`` in the 2-norm."""
    if kind not in ("r0", "nd"):
        raise ValueError("kind must be 'r0' or 'nd'")
    if budget <= 0:
        raise ValueError("budget must be positive")
    n = A.dim
    eye = np.eye(n)

    def resfun(Z):
        F = apply_power(A, Z)
        JF = jacobian(A, Z)
        if kind == "r0":
            pick = (F < Z)[..., None]
            return np.minimum(Z, F), np.where(pick, JF, eye), Z
        return Z * F, F[..., None] * eye + Z[..., None] * JF, Z

    rng = np.random.default_rng([int(seed), 0 if kind == "r0" else 1])
    starts = max(1, int(round(STARTS_PER_BUDGET * budget)))
    Z0 = np.concatenate([_lattice(n), rng.standard_normal((starts, n))])
    Z, f, _ = _lm(resfun, Z0, n, False)
    out: list[np.ndarray] = []
    for z in Z:
        z = _clean(z)
        r, _, _ = resfun(z[None])
        if np.linalg.norm(r) <= tol and abs(np.linalg.norm(z) - 1) <= 1e-9:
            if all(np.max(np.abs(z - w)) > 1e-6 for w in out):
                out.append(z)
    return out


def componentwise_r0_witness(A: Tensor, budget: float = 1.0, seed: int = 0):
    """A unit ``x`` with ``x ∧ A x^{m-1} = 0``, or ``None``."""
    found = componentwise_witnesses(A, "r0", budget, seed)
    return found[0] if found else None


def componentwise_nondegenerate_witness(A: Tensor, budget: float = 1.0, seed: int = 0):
    """A unit ``x`` with ``x * A x^{m-1} = 0``, or ``None``."""
    found = componentwise_witnesses(A, "nd", budget, seed)
    return found[0] if found else None


# --------------------------------------------------------------------------
# hierarchy


def _edges(k: int):
    E = ClassName
    # a premise of the source class implies the premise of the target
    # (strong targets take the pair (x, 0))
    edges = {
        (E.EHR0, E.EHE), (E.EHE, E.EHP), (E.EHND, E.EHP),
        (E.STRONG_EHND, E.STRONG_EHP), (E.EHP, E.STRONG_EHP), (E.EHND, E.STRONG_EHND),
    }
    if k <= 1:
        edges.add((E.EHR0, E.EHND))
    return edges


def implies(from_cls, to_cls, k: int) -> bool:
    """Whether a witness for ``from_cls`` is also one for ``to_cls``."""
    from_cls, to_cls = ClassName(from_cls), ClassName(to_cls)
    if from_cls == to_cls:
        return True
    edges = _edges(k)
    seen, frontier = {from_cls}, [from_cls]
    while frontier:
        c = frontier.pop()
        for a, b in edges:
            if a == c and b not in seen:
                seen.add(b)
                frontier.append(b)
    return to_cls in seen


def propagate_witness(witness: Witness, from_cls, to_cls, tup: TensorTuple,
                      tol: float = WITNESS_TOL) -> Witness | None:
    """Reuse a witness along a class inclusion.

    Returns the witness re-scored for ``to_cls`` when an inclusion maps the
    premise of ``from_cls`` into that of ``to_cls``; ``None`` otherwise.
    """
    from_cls, to_cls = ClassName(from_cls), ClassName(to_cls)
    if not implies(from_cls, to_cls, tup.k):
        return None
    if from_cls.strong and not to_cls.strong:
        return None
    x = witness.point
    xb = witness.partner
    if to_cls.strong and xb is None:
        xb = np.zeros_like(x)
    if not to_cls.strong:
        xb = None
    res = premise_residual(to_cls, tup, (x, xb) if to_cls.strong else x)
    if res > tol:
        return None
    cert = float(np.linalg.norm(x - xb) if xb is not None else np.linalg.norm(x))
    return Witness(x, xb, res, cert)


def odd_m_strong_witness(tup: TensorTuple, x0=None) -> Witness:
    """The pair ``(x_0, 0, .., 0)``, ``(-x_0, 0, .., 0)`` for odd ``m``.

    Even powers make ``A_0 x_0^{m-1} = A_0 (-x_0)^{m-1}``, and the other
    differences vanish, so the strong non-degeneracy premise holds exactly.
    """
    if tup.m % 2 == 0:
        raise ValueError(f"the antipodal pair witness needs odd m, got m = {tup.m}")
    x = np.zeros((tup.k + 1, tup.n))
    x[0] = np.eye(tup.n)[0] if x0 is None else np.asarray(x0, dtype=float)
    if not np.any(x[0]):
        raise ValueError("x0 must be nonzero")
    x = 0.5 * x / np.linalg.norm(x[0])
    res = premise_residual(ClassName.STRONG_EHND, tup, (x, -x))
    return Witness(x, -x, res, float(np.linalg.norm(2 * x)))


def injectivity_probe(A: Tensor, samples: int = 200, seed: int = 0, tol: float = WITNESS_TOL):
    """Search for ``x != x̄`` with ``A x^{m-1} = A x̄^{m-1}``.

    Returns a pair normalized to ``‖x - x̄‖ = 1`` or ``None``.
    """
    if samples <= 0:
        raise ValueError("samples must be positive")
    n = A.dim

    def resfun(Z):
        x, xb = Z[:, :n], Z[:, n:]
        r = apply_power(A, x) - apply_power(A, xb)
        J = np.concatenate([jacobian(A, x), -jacobian(A, xb)], axis=-1)
        return r, J, x - xb

    rng = np.random.default_rng(seed)
    seeds = []
    if A.order % 2 == 1:
        for i in range(n):
            e = 0.5 * np.eye(n)[i]
            seeds.append(np.concatenate([e, -e]))
    xb = rng.standard_normal((samples, n))
    Z0 = np.concatenate([xb + rng.standard_normal((samples, n)), xb], axis=1)
    if seeds:
        Z0 = np.concatenate([np.array(seeds), Z0])
    Z, f, ok = _lm(resfun, Z0, n, True, radius=10.0)
    for z, good in zip(Z, ok):
        if not good:
            continue
        x, xb = z[:n], z[n:]
        if np.linalg.norm(apply_power(A, x) - apply_power(A, xb)) <= tol and \
                np.linalg.norm(x - xb) >= 1e-3:
            return x, xb
    return None
