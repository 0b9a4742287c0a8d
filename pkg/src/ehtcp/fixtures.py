"""Worked instances with known structure, used by the reproduction suite.

Tensors are written with 1-based subscripts, ``{(1, 2, 2): 1.0}`` meaning
``a_{122} = 1``.  Each builder returns a :class:`TensorTuple`; the instance
builders attach ``d`` and ``q``.
"""

from __future__ import annotations

import numpy as np

from .problem_model import EHTCPInstance, TensorTuple
from .tensor_core import Tensor, identity_tensor

__all__ = [
    "ex31_tuple", "ex32_tuple", "ex33_tuple", "ex34_tuple",
    "odd_m_tuple", "infinite_tuple", "finite_tuple", "hlcp_identity_tuple",
    "ex34_instance", "odd_m_instance", "infinite_instance", "finite_instance",
    "hlcp_instance", "homogeneous_instance", "TUPLES",
]


def _t(m, n, entries) -> Tensor:
    return Tensor.from_one_based(m, n, entries)


def ex31_tuple() -> TensorTuple:
    """EHR0 and EHND, not EHE; no member is an R0 tensor."""
    return TensorTuple([
        _t(3, 2, {(1, 2, 2): 1, (2, 1, 1): 1}),
        _t(3, 2, {(1, 2, 2): -1, (2, 1, 1): 1}),
        _t(3, 2, {(1, 2, 2): -1, (2, 1, 1): 1}),
    ])


def ex32_tuple() -> TensorTuple:
    """Non-degenerate members, but neither EHND nor EHR0."""
    return TensorTuple([
        _t(3, 2, {(1, 1, 1): 1, (2, 1, 1): 1, (2, 2, 2): 1}),
        _t(3, 2, {(1, 1, 1): 1, (1, 2, 2): 1, (2, 2, 2): 1}),
        _t(3, 2, {(1, 1, 1): 1, (1, 2, 2): 1, (2, 1, 1): 1, (2, 2, 2): 1}),
    ])


def ex33_tuple(flip_a2: bool = False) -> TensorTuple:
    """EHND and strong EHND, not EHR0; every member is degenerate.

    ``flip_a2`` negates ``A_2`` (a perturbation used to test the suite).
    """
    s = -1.0 if flip_a2 else 1.0
    return TensorTuple([
        _t(4, 2, {(1, 2, 2, 2): 1, (2, 1, 1, 1): 1}),
        _t(4, 2, {(1, 2, 2, 2): -1, (2, 1, 1, 1): 1}),
        _t(4, 2, {(1, 2, 2, 2): s, (2, 1, 1, 1): -s}),
    ])


def ex34_tuple() -> TensorTuple:
    """Strong EHP with even m."""
    return TensorTuple([
        _t(4, 2, {(1, 1, 1, 1): 1, (2, 2, 2, 2): 1}),
        _t(4, 2, {(1, 1, 1, 1): 1, (1, 2, 2, 2): 1, (2, 2, 2, 2): 1}),
    ])


def odd_m_tuple() -> TensorTuple:
    """EHE with m = 3, yet unsolvable for ``q = (-1, -1)``."""
    return TensorTuple([
        _t(3, 2, {(1, 1, 1): 1, (1, 2, 2): 1, (2, 2, 2): 1}),
        _t(3, 2, {(1, 1, 1): -1, (2, 2, 2): -1}),
    ])


def infinite_tuple() -> TensorTuple:
    """EHND, with a continuum of solutions at ``q = (1, 0, 0)``."""
    return TensorTuple([
        _t(3, 3, {(1, 1, 1): 1, (1, 2, 2): 1}),
        _t(3, 3, {(2, 1, 1): -1, (2, 2, 2): -1}),
        _t(3, 3, {(3, 1, 1): 1, (3, 2, 2): 1}),
    ])


def finite_tuple() -> TensorTuple:
    """Not EHND, but every solution set is finite."""
    return TensorTuple([
        _t(4, 2, {(1, 1, 1, 1): 1, (2, 2, 2, 2): 1}),
        _t(4, 2, {(1, 1, 1, 1): 1, (1, 2, 2, 2): 1, (2, 2, 2, 2): -1, (2, 2, 2, 1): -1}),
    ])


def hlcp_identity_tuple(n: int = 2, m: int = 2) -> TensorTuple:
    """``(I, I)``: for ``m = 2`` the horizontal LCP ``x_0 = q + x_1``."""
    return TensorTuple([identity_tensor(m, n), identity_tensor(m, n)])


def _inst(tup, q, d=(), label=None) -> EHTCPInstance:
    return EHTCPInstance(tup, np.asarray(d, dtype=float).reshape(-1, tup.n), q, label)


def homogeneous_instance(tup: TensorTuple, label=None) -> EHTCPInstance:
    """``q = 0`` with ``d_j = 1``."""
    return _inst(tup, np.zeros(tup.n), np.ones((tup.k - 1, tup.n)), label)


def ex34_instance(q=(1.0, 1.0)) -> EHTCPInstance:
    return _inst(ex34_tuple(), q, label="ex34")


def odd_m_instance(q=(-1.0, -1.0)) -> EHTCPInstance:
    return _inst(odd_m_tuple(), q, label="odd_m")


def infinite_instance(q=(1.0, 0.0, 0.0), d1=(1.0, 1.0, 1.0)) -> EHTCPInstance:
    return _inst(infinite_tuple(), q, [d1], label="infinite")


def finite_instance(q=(1.0, 1.0)) -> EHTCPInstance:
    return _inst(finite_tuple(), q, label="finite")


def hlcp_instance(q=(1.0, -1.0), n: int = 2) -> EHTCPInstance:
    return _inst(hlcp_identity_tuple(n), q, label="hlcp")


TUPLES = {
    "ex31": ex31_tuple,
    "ex32": ex32_tuple,
    "ex33": ex33_tuple,
    "ex34": ex34_tuple,
    "odd_m": odd_m_tuple,
    "infinite": infinite_tuple,
    "finite": finite_tuple,
    "hlcp": hlcp_identity_tuple,
}
