"""Sparse-storage, dense-evaluation tensor algebra.

A :class:`Tensor` of order ``m`` and dimension ``n`` stores its nonzero
coefficients as a coordinate list.  Evaluation of the tensor power
``A x^{m-1}`` and of its Jacobian loops over the stored entries only, and
every evaluator broadcasts over leading batch axes of ``x``.

Indices are 0-based internally; :meth:`Tensor.from_one_based` accepts the
1-based subscripts used in the file format (``a_{122}`` -> ``(1, 2, 2)``).
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "identity_tensor",
    "apply_power",
    "jacobian",
    "min_map",
    "hadamard",
    "elementwise_power",
    "real_root",
]


class Tensor:
    """Real tensor of order ``m >= 2`` and dimension ``n >= 1``.

    Parameters
    ----------
    order, dim : int
        ``m`` and ``n``.
    entries : mapping or iterable of ``(index_tuple, value)``
        0-based index tuples of length ``m``.  Duplicates are rejected and
        exact zeros are dropped.
    """

    __slots__ = ("_order", "_dim", "_entries", "_rows", "_idx", "_coef",
                 "_row_onehot", "_jac_maps")

    def __init__(self, order: int, dim: int, entries=()):
        order, dim = int(order), int(dim)
        if order < 2:
            raise ValueError(f"tensor order must be >= 2, got {order}")
        if dim < 1:
            raise ValueError(f"tensor dimension must be >= 1, got {dim}")
        items = entries.items() if isinstance(entries, Mapping) else entries
        store: dict[tuple[int, ...], float] = {}
        for index, value in items:
            index = tuple(int(i) for i in index)
            if len(index) != order:
                raise ValueError(
                    f"index {index} has {len(index)} components, expected {order}")
            if any(i < 0 or i >= dim for i in index):
                raise ValueError(f"index {index} out of range 0..{dim - 1}")
            if index in store:
                raise ValueError(f"duplicate index {index}")
            value = float(value)
            if not np.isfinite(value):
                raise ValueError(f"coefficient at {index} is not finite")
            if value != 0.0:
                store[index] = value
        self._order = order
        self._dim = dim
        self._entries = tuple(sorted(store.items()))

        e = len(self._entries)
        idx = np.array([k for k, _ in self._entries], dtype=np.intp).reshape(e, order)
        self._rows = idx[:, 0].copy()
        self._idx = idx[:, 1:].copy()
        self._coef = np.array([v for _, v in self._entries], dtype=float)
        onehot = np.zeros((e, dim))
        onehot[np.arange(e), self._rows] = 1.0
        self._row_onehot = onehot
        # J[row, idx[:, p]] += coef * prod_{r != p} x[idx[:, r]]
        maps = []
        for p in range(order - 1):
            mp = np.zeros((e, dim * dim))
            mp[np.arange(e), self._rows * dim + self._idx[:, p]] = 1.0
            maps.append(mp)
        self._jac_maps = maps
        for arr in (self._rows, self._idx, self._coef, self._row_onehot, *maps):
            arr.flags.writeable = False

    @classmethod
    def from_one_based(cls, order: int, dim: int, entries) -> "Tensor":
        """Build from 1-based index tuples, e.g. ``{(1, 2, 2): 1.0}``."""
        items = entries.items() if isinstance(entries, Mapping) else entries
        shifted = []
        for index, value in items:
            index = tuple(int(i) for i in index)
            if any(i < 1 or i > dim for i in index):
                raise ValueError(f"index {index} out of range 1..{dim}")
            shifted.append((tuple(i - 1 for i in index), value))
        return cls(order, dim, shifted)

    @classmethod
    def from_dense(cls, array) -> "Tensor":
        array = np.asarray(array, dtype=float)
        if array.ndim < 2 or len(set(array.shape)) != 1:
            raise ValueError("dense tensor must be a hypercube of order >= 2")
        nz = np.argwhere(array != 0)
        return cls(array.ndim, array.shape[0],
                   [(tuple(k), array[tuple(k)]) for k in nz])

    @property
    def order(self) -> int:
        return self._order

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def entries(self) -> tuple[tuple[tuple[int, ...], float], ...]:
        """Sorted ``(0-based index, value)`` pairs of the nonzero entries."""
        return self._entries

    @property
    def nnz(self) -> int:
        return len(self._entries)

    def one_based_entries(self) -> list[tuple[tuple[int, ...], float]]:
        return [(tuple(i + 1 for i in k), v) for k, v in self._entries]

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self._dim,) * self._order)
        for k, v in self._entries:
            out[k] = v
        return out

    def max_abs(self) -> float:
        return float(np.max(np.abs(self._coef))) if self.nnz else 0.0

    def scaled(self, factor: float) -> "Tensor":
        return Tensor(self._order, self._dim,
                      [(k, factor * v) for k, v in self._entries])

    def __add__(self, other: "Tensor") -> "Tensor":
        if not isinstance(other, Tensor):
            return NotImplemented
        _check_same_shape(self, other)
        acc = dict(self._entries)
        for k, v in other._entries:
            acc[k] = acc.get(k, 0.0) + v
        return Tensor(self._order, self._dim, acc)

    def __neg__(self) -> "Tensor":
        return self.scaled(-1.0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Tensor):
            return NotImplemented
        return (self._order, self._dim, self._entries) == (
            other._order, other._dim, other._entries)

    def __hash__(self) -> int:
        return hash((self._order, self._dim, self._entries))

    def __repr__(self) -> str:
        body = ", ".join(f"{k}: {v:g}" for k, v in self.one_based_entries())
        return f"Tensor(m={self._order}, n={self._dim}, {{{body}}})"


def _check_same_shape(a: Tensor, b: Tensor) -> None:
    if (a.order, a.dim) != (b.order, b.dim):
        raise ValueError(
            f"shape mismatch: (m={a.order}, n={a.dim}) vs (m={b.order}, n={b.dim})")


def _as_vec(x, n: int, name: str = "x") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != n:
        raise ValueError(f"{name} has trailing dimension {x.shape[-1:]}, expected {n}")
    return x


def identity_tensor(order: int, dim: int) -> Tensor:
    """The tensor with ``a_{i i ... i} = 1`` so that ``I x^{m-1} = x^{[m-1]}``."""
    return Tensor(order, dim, [((i,) * order, 1.0) for i in range(dim)])


def apply_power(A: Tensor, x) -> np.ndarray:
    """``(A x^{m-1})_i = sum a_{i i2 .. im} x_{i2} ... x_{im}``.

    ``x`` may carry leading batch axes; the result has the shape of ``x``.
    """
    x = _as_vec(x, A.dim)
    if A.nnz == 0:
        return np.zeros_like(x)
    terms = np.prod(x[..., A._idx], axis=-1) * A._coef
    return terms @ A._row_onehot


def jacobian(A: Tensor, x) -> np.ndarray:
    """Derivative of :func:`apply_power` with respect to ``x``.

    Returns an array of shape ``x.shape + (n,)`` with ``J[..., i, j] =
    d(A x^{m-1})_i / dx_j``, assembled by the multilinear product rule.
    """
    x = _as_vec(x, A.dim)
    n = A.dim
    out_shape = x.shape + (n,)
    if A.nnz == 0:
        return np.zeros(out_shape)
    factors = x[..., A._idx]  # (..., E, m-1)
    m1 = A.order - 1
    flat = np.zeros(x.shape[:-1] + (n * n,))
    for p in range(m1):
        others = [r for r in range(m1) if r != p]
        partial = np.prod(factors[..., others], axis=-1) if others else 1.0
        flat = flat + (partial * A._coef) @ A._jac_maps[p]
    return flat.reshape(out_shape)


def min_map(x, y) -> np.ndarray:
    """Componentwise minimum ``x ∧ y``."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return np.minimum(x, y)


def hadamard(x, y) -> np.ndarray:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return x * y


def elementwise_power(x, p: int) -> np.ndarray:
    """``x^{[p]}`` for a positive integer ``p``."""
    if int(p) != p or p < 1:
        raise ValueError(f"power must be a positive integer, got {p}")
    return np.asarray(x, dtype=float) ** int(p)


def real_root(t, p: int):
    """Real ``p``-th root; odd ``p`` maps negative ``t`` to the negative root."""
    t = np.asarray(t, dtype=float)
    if p == 3:
        return np.cbrt(t)
    if p % 2 == 1:
        return np.sign(t) * np.abs(t) ** (1.0 / p)
    if np.any(t < 0):
        raise ValueError("even root of a negative number")
    return t ** (1.0 / p)


def interval_power(A: Tensor, lo: Sequence[float], hi: Sequence[float]):
    """Enclosure of ``A x^{m-1}`` over the box ``lo <= x <= hi``.

    Repeated factors are handled as true powers, so ``x_1^2`` over
    ``[-1, 1]`` encloses to ``[0, 1]`` rather than ``[-1, 1]``.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    out_lo = np.zeros(A.dim)
    out_hi = np.zeros(A.dim)
    for (row, *rest), coef in A.entries:
        ilo, ihi = 1.0, 1.0
        for var in set(rest):
            plo, phi = _ipow(lo[var], hi[var], rest.count(var))
            ilo, ihi = _imul(ilo, ihi, plo, phi)
        tlo, thi = _imul(coef, coef, ilo, ihi)
        out_lo[row] += tlo
        out_hi[row] += thi
    return out_lo, out_hi


def _prod0(a: float, b: float) -> float:
    # 0 * inf is 0 for enclosures of actual (finite) values
    if a == 0.0 or b == 0.0:
        return 0.0
    return a * b


def _imul(alo, ahi, blo, bhi):
    cands = [_prod0(alo, blo), _prod0(alo, bhi), _prod0(ahi, blo), _prod0(ahi, bhi)]
    return min(cands), max(cands)


def _ipow(lo: float, hi: float, p: int):
    if p % 2 == 1 or lo >= 0:
        return lo ** p, hi ** p
    if hi <= 0:
        return hi ** p, lo ** p
    return 0.0, max(lo ** p, hi ** p)

