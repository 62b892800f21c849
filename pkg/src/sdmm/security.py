"""Leakage audits: mask-matrix rank and exhaustive view enumeration."""

from __future__ import annotations

import itertools
from collections import Counter
from collections.abc import Sequence
from typing import Literal

import numpy as np

from .matrix import DenseMatrix
from .scheme import PartitionParams, SchemePlan, _evaluate

DEFAULT_BUDGET = 1 << 20


class EnumerationBudgetExceeded(RuntimeError):
    pass


def _check_indices(plan: SchemePlan, indices: Sequence[int]):
    if len(set(indices)) != len(indices):
        raise ValueError(f"duplicate server indices in {list(indices)}")
    for i in indices:
        if not 1 <= i <= plan.n:
            raise ValueError(f"server index {i} outside [1, {plan.n}]")


def mask_matrix(plan: SchemePlan, point_indices: Sequence[int], side: Literal["A", "B"]) -> list[list[int]]:
    """Row k, column j holds (alpha**i_j)**e_k for the k-th mask exponent of one side.

    With T indices this is square; fewer indices give a T x len(indices) matrix
    whose full column rank is what hides the corresponding evaluations.
    """
    _check_indices(plan, point_indices)
    if side == "A":
        exps = [e for _, e in sorted(plan.layout.a_mask_exponents.items())]
    elif side == "B":
        exps = [e for _, e in sorted(plan.layout.b_mask_exponents.items())]
    else:
        raise ValueError(f"side must be 'A' or 'B', got {side!r}")
    return [[plan.root.power(i * e) for i in point_indices] for e in exps]


def rank_mod(rows: list[list[int]], q: int) -> int:
    """Rank over GF(q) by Gaussian elimination."""
    m = [[v % q for v in row] for row in rows]
    if not m or not m[0]:
        return 0
    rank, ncols = 0, len(m[0])
    for col in range(ncols):
        pivot = next((r for r in range(rank, len(m)) if m[r][col]), None)
        if pivot is None:
            continue
        m[rank], m[pivot] = m[pivot], m[rank]
        inv = pow(m[rank][col], -1, q)
        m[rank] = [v * inv % q for v in m[rank]]
        for r in range(len(m)):
            if r != rank and m[r][col]:
                f = m[r][col]
                m[r] = [(x - f * y) % q for x, y in zip(m[r], m[rank])]
        rank += 1
    return rank


def mask_matrices_full_rank(plan: SchemePlan, size: int | None = None) -> bool:
    """Check every ``size``-subset of servers (default T) on both sides."""
    size = plan.params.T if size is None else size
    for subset in itertools.combinations(range(1, plan.n + 1), size):
        for side in ("A", "B"):
            if rank_mod(mask_matrix(plan, subset, side), plan.q) != size:
                return False
    return True


def _side_views(plan: SchemePlan, data: np.ndarray, side: str, colluding: Sequence[int]) -> Counter:
    """Multiset of colluding views of one encoder over every possible mask value."""
    layout, T, q, field = plan.layout, plan.params.T, plan.q, plan.field
    terms = layout.a_terms() if side == "A" else layout.b_terms()
    n_data = len(terms) - T
    exps = [e for _, e in terms]
    data_coeffs = [DenseMatrix(field, [[int(v)]]) for v in data.reshape(-1)]
    assert len(data_coeffs) == n_data
    views: Counter = Counter()
    for masks in itertools.product(range(q), repeat=T):
        coeffs = data_coeffs + [DenseMatrix(field, [[m]]) for m in masks]
        evals = _evaluate(plan, coeffs, exps)
        views[tuple(int(evals[i - 1].values[0, 0]) for i in colluding)] += 1
    return views


def exhaustive_security_check(params: PartitionParams, plan: SchemePlan, colluding_set: Sequence[int],
                              budget: int = DEFAULT_BUDGET, inputs=None) -> bool:
    """Enumerate every mask value with 1x1 blocks and compare what the colluders see.

    Passes iff, for each side, the multiset of view tuples is the same for two
    distinct inputs and is uniform over GF(q)^k (each tuple appears q**(T-k)
    times). ``inputs`` optionally overrides the pair of (A, B) test inputs, given
    as integer arrays of shape (t, s) and (s, d).
    """
    if params != plan.params:
        raise ValueError("plan was built for different parameters")
    colluding = sorted(colluding_set)
    _check_indices(plan, colluding)
    k, T, q = len(colluding), params.T, plan.q
    if k > T:
        raise ValueError(f"{k} colluders exceed the security level T={T}")
    if k == 0:
        return True
    if q ** T > budget:
        raise EnumerationBudgetExceeded(f"q**T = {q}**{T} exceeds enumeration budget {budget}")
    if inputs is None:
        a_shape, b_shape = (params.t, params.s), (params.s, params.d)
        inputs = [
            (np.zeros(a_shape, dtype=np.int64), np.zeros(b_shape, dtype=np.int64)),
            (np.arange(1, params.t * params.s + 1).reshape(a_shape) % q,
             np.arange(2, params.s * params.d + 2).reshape(b_shape) % q),
        ]
    expected = q ** (T - k)
    for side, pick in (("A", 0), ("B", 1)):
        reference = None
        for pair in inputs:
            views = _side_views(plan, np.asarray(pair[pick]), side, colluding)
            if len(views) != q ** k or any(c != expected for c in views.values()):
                return False
            if reference is not None and views != reference:
                return False
            reference = views
    return True
