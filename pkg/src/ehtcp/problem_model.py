"""EHTCP instances, the stacked min-map residuals and solution checks.

A point ``x = (x_0, ..., x_k)`` is stored as an array of shape ``(k+1, n)``;
the stacked maps act on its flattening (block-major, length ``(k+1) n``).
Both residual maps share one layout: ``k n`` min rows, then the ``n`` rows
of the tensor block ``A_0 x_0^{m-1} - sum_j A_j x_j^{m-1}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tensor_core import Tensor, apply_power, jacobian

__all__ = [
    "TensorTuple",
    "EHTCPInstance",
    "CandidateSolution",
    "StackedMap",
    "residual_psi_d",
    "residual_psi_A",
    "is_solution",
    "check_lemma31",
    "DEFAULT_TOL",
]

DEFAULT_TOL = 1e-9


class TensorTuple:
    """Ordered tensors ``(A_0, ..., A_k)``, ``k >= 1``, sharing ``(m, n)``."""

    def __init__(self, tensors: Sequence[Tensor]):
        tensors = tuple(tensors)
        if len(tensors) < 2:
            raise ValueError("a tensor tuple needs at least A_0 and A_1 (k >= 1)")
        m, n = tensors[0].order, tensors[0].dim
        for j, t in enumerate(tensors):
            if not isinstance(t, Tensor):
                raise TypeError(f"tensors[{j}] is not a Tensor")
            if (t.order, t.dim) != (m, n):
                raise ValueError(
                    f"tensors[{j}] has shape (m={t.order}, n={t.dim}), expected (m={m}, n={n})")
        self.tensors = tensors
        self.m = m
        self.n = n
        self.k = len(tensors) - 1

    def __len__(self) -> int:
        return len(self.tensors)

    def __iter__(self):
        return iter(self.tensors)

    def __getitem__(self, j) -> Tensor:
        return self.tensors[j]

    def __eq__(self, other) -> bool:
        return isinstance(other, TensorTuple) and self.tensors == other.tensors

    def __hash__(self) -> int:
        return hash(self.tensors)

    def __repr__(self) -> str:
        return f"TensorTuple(m={self.m}, n={self.n}, k={self.k})"

    @property
    def size(self) -> int:
        """Number of scalar unknowns ``(k+1) n``."""
        return (self.k + 1) * self.n

    def max_abs(self) -> float:
        return max(t.max_abs() for t in self.tensors)

    def tensor_block(self, X) -> np.ndarray:
        """``A_0 x_0^{m-1} - sum_j A_j x_j^{m-1}`` for ``X`` of shape ``(..., k+1, n)``."""
        X = np.asarray(X, dtype=float)
        out = apply_power(self.tensors[0], X[..., 0, :])
        for j in range(1, self.k + 1):
            out = out - apply_power(self.tensors[j], X[..., j, :])
        return out

    def tensor_block_jacobian(self, X) -> np.ndarray:
        """Jacobian of :meth:`tensor_block` w.r.t. the flattened point, ``(..., n, (k+1) n)``."""
        X = np.asarray(X, dtype=float)
        blocks = [jacobian(self.tensors[0], X[..., 0, :])]
        blocks += [-jacobian(self.tensors[j], X[..., j, :]) for j in range(1, self.k + 1)]
        return np.concatenate(blocks, axis=-1)


@dataclass(frozen=True, eq=False)
class EHTCPInstance:
    """The datum ``(Â, d̂, q)``; ``d`` has shape ``(k-1, n)`` and is strictly positive."""

    tuple: TensorTuple
    d: np.ndarray
    q: np.ndarray
    label: str | None = None

    def __post_init__(self):
        tup = self.tuple
        if not isinstance(tup, TensorTuple):
            tup = TensorTuple(tup)
            object.__setattr__(self, "tuple", tup)
        n, k = tup.n, tup.k
        d = np.asarray(self.d, dtype=float).reshape(-1, n) if np.size(self.d) else np.zeros((0, n))
        if d.shape != (k - 1, n):
            raise ValueError(f"d must hold k-1 = {k - 1} vectors of length {n}, got shape {d.shape}")
        if not np.all(np.isfinite(d)):
            raise ValueError("d has non-finite components")
        bad = np.argwhere(d <= 0)
        if bad.size:
            j, i = bad[0]
            raise ValueError(
                f"d[{j}][{i}] = {d[j, i]!r} is not strictly positive (d_j must be positive vectors)")
        q = np.asarray(self.q, dtype=float)
        if q.shape != (n,):
            raise ValueError(f"q must have length {n}, got shape {q.shape}")
        if not np.all(np.isfinite(q)):
            raise ValueError("q has non-finite components")
        d.flags.writeable = False
        q = q.copy()
        q.flags.writeable = False
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "q", q)

    @property
    def m(self) -> int:
        return self.tuple.m

    @property
    def n(self) -> int:
        return self.tuple.n

    @property
    def k(self) -> int:
        return self.tuple.k

    def with_q(self, q) -> "EHTCPInstance":
        return EHTCPInstance(self.tuple, self.d, q, self.label)

    def __eq__(self, other) -> bool:
        return (isinstance(other, EHTCPInstance)
                and self.tuple == other.tuple
                and np.array_equal(self.d, other.d)
                and np.array_equal(self.q, other.q)
                and self.label == other.label)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class CandidateSolution:
    """A point ``(x_0, ..., x_k)`` with its residual diagnostics."""

    blocks: np.ndarray
    residual_inf: float
    complementarity_inf: float
    meta: dict = field(default_factory=dict, compare=False)

    @classmethod
    def evaluate(cls, inst: EHTCPInstance, blocks, **meta) -> "CandidateSolution":
        blocks = _as_point(blocks, inst.k, inst.n).copy()
        blocks.flags.writeable = False
        r = residual_psi_d(inst, blocks)
        kn = inst.k * inst.n
        comp = float(np.max(np.abs(r[:kn]))) if kn else 0.0
        return cls(blocks, float(np.max(np.abs(r))), comp, dict(meta))

    @property
    def flat(self) -> np.ndarray:
        return self.blocks.reshape(-1)

    def __repr__(self) -> str:
        body = np.array2string(self.blocks, precision=6, suppress_small=True)
        return f"CandidateSolution({body}, residual_inf={self.residual_inf:.2e})"


def _as_point(x, k: int, n: int) -> np.ndarray:
    if isinstance(x, CandidateSolution):
        x = x.blocks
    x = np.asarray(x, dtype=float)
    if x.shape == ((k + 1) * n,):
        x = x.reshape(k + 1, n)
    if x.shape != (k + 1, n):
        raise ValueError(f"point has shape {x.shape}, expected ({k + 1}, {n})")
    return x


class StackedMap:
    """Piecewise-smooth map of min rows stacked over the tensor block.

    Min row ``c`` is ``min(L_c, R_c)`` with ``L_c = a_c + s_c z[u_c]`` and
    ``R_c = b_c + t_c z[v_c]``; each side is affine in one coordinate of the
    flattened point ``z``.
    """

    def __init__(self, tup: TensorTuple, left_const, left_coef, left_var,
                 right_const, right_coef, right_var, name: str = ""):
        self.tuple = tup
        self.name = name
        self.left_const = np.asarray(left_const, dtype=float)
        self.left_coef = np.asarray(left_coef, dtype=float)
        self.left_var = np.asarray(left_var, dtype=np.intp)
        self.right_const = np.asarray(right_const, dtype=float)
        self.right_coef = np.asarray(right_coef, dtype=float)
        self.right_var = np.asarray(right_var, dtype=np.intp)

    @classmethod
    def psi_d(cls, inst: EHTCPInstance) -> "StackedMap":
        """Rows ``x_0 ∧ x_1`` and ``(d_j - x_j) ∧ x_{j+1}``, ``j = 1..k-1``."""
        n, k = inst.n, inst.k
        lc, ls, lv, rc, rs, rv = [], [], [], [], [], []
        for i in range(n):
            lc.append(0.0), ls.append(1.0), lv.append(i)
            rc.append(0.0), rs.append(1.0), rv.append(n + i)
        for j in range(1, k):
            for i in range(n):
                lc.append(inst.d[j - 1, i]), ls.append(-1.0), lv.append(j * n + i)
                rc.append(0.0), rs.append(1.0), rv.append((j + 1) * n + i)
        return cls(inst.tuple, lc, ls, lv, rc, rs, rv, name="psi_d")

    @classmethod
    def psi_A(cls, tup: TensorTuple) -> "StackedMap":
        """Rows ``x_0 ∧ x_j`` for ``j = 1..k``."""
        n, k = tup.n, tup.k
        lv = [i for _ in range(k) for i in range(n)]
        rv = [j * n + i for j in range(1, k + 1) for i in range(n)]
        ones = np.ones(k * n)
        return cls(tup, np.zeros(k * n), ones, lv, np.zeros(k * n), ones, rv, name="psi_A")

    @property
    def n_min_rows(self) -> int:
        return self.left_var.size

    @property
    def size(self) -> int:
        return self.tuple.size

    def sides(self, Z):
        Z = np.asarray(Z, dtype=float)
        L = self.left_const + self.left_coef * Z[..., self.left_var]
        R = self.right_const + self.right_coef * Z[..., self.right_var]
        return L, R

    def _blocks(self, Z):
        Z = np.asarray(Z, dtype=float)
        return Z.reshape(Z.shape[:-1] + (self.tuple.k + 1, self.tuple.n))

    def evaluate(self, Z) -> np.ndarray:
        L, R = self.sides(Z)
        return np.concatenate([np.minimum(L, R), self.tuple.tensor_block(self._blocks(Z))], axis=-1)

    def jacobian(self, Z, branch=None) -> np.ndarray:
        """Generalized Jacobian.

        ``branch`` (0 = left, 1 = right per min row) fixes the selection;
        otherwise the smaller side is used, ties going left.
        """
        Z = np.asarray(Z, dtype=float)
        N, c = self.size, self.n_min_rows
        if branch is None:
            L, R = self.sides(Z)
            right = R < L
        else:
            right = np.broadcast_to(np.asarray(branch, dtype=bool), Z.shape[:-1] + (c,))
        top = np.zeros(Z.shape[:-1] + (c, N))
        var = np.where(right, self.right_var, self.left_var)
        coef = np.where(right, self.right_coef, self.left_coef)
        np.put_along_axis(top, var[..., None], coef[..., None], axis=-1)
        bottom = self.tuple.tensor_block_jacobian(self._blocks(Z))
        return np.concatenate([top, bottom], axis=-2)


def _shift(inst: EHTCPInstance) -> np.ndarray:
    return np.concatenate([np.zeros(inst.k * inst.n), inst.q])


def residual_psi_d(inst: EHTCPInstance, x) -> np.ndarray:
    """Stacked residual of ``EHTCP(Â, d̂, q)``; zero exactly at solutions."""
    z = _as_point(x, inst.k, inst.n).reshape(-1)
    return StackedMap.psi_d(inst).evaluate(z) - _shift(inst)


def residual_psi_A(tup: TensorTuple, x) -> np.ndarray:
    """``Ψ_Â(x)``: rows ``x_0 ∧ x_i`` over the homogeneous tensor block."""
    z = _as_point(x, tup.k, tup.n).reshape(-1)
    return StackedMap.psi_A(tup).evaluate(z)


def is_solution(inst: EHTCPInstance, x, tol: float = DEFAULT_TOL) -> bool:
    if tol <= 0:
        raise ValueError("tol must be positive")
    return bool(np.max(np.abs(residual_psi_d(inst, x))) <= tol)


def check_lemma31(inst: EHTCPInstance, x, tol: float = 1e-7) -> bool:
    """``x_0 ∧ x_i = 0`` for every ``i`` in ``1..k``, to ``tol`` in max-norm."""
    X = _as_point(x, inst.k, inst.n)
    mins = np.minimum(X[0], X[1:])
    return bool(np.max(np.abs(mins)) <= tol)
