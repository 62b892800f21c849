"""Grid-partition SDMM: exponent layouts, evaluation-point order, encode and decode.

``f_A`` carries the t x s blocks of A at exponents ``(i-1)s + j-1`` followed by
T random masks; ``f_B`` carries the s x d blocks of B at non-positive exponents
chosen so that every product ``A[i,l] B[l,j]`` lands on one exponent per output
block. Servers evaluate at the powers ``alpha**1 .. alpha**N`` of an order-N
root of unity, and the user reads off each output block with a weighted sum of
the N responses.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Literal, Union

import numpy as np

from .field import PrimeField, RootOfUnity, find_field_modulus, nth_root_of_unity, prime_factors
from .matrix import (BlockGrid, DenseMatrix, DimensionError, mod_matmul, partition, reassemble,
                     uniform_residues)

NChoice = Union[Literal["minimal", "closed-form"], int]


class InvalidEvaluationOrder(ValueError):
    """Raised when an explicitly requested N does not separate the wanted coefficients."""


@dataclass(frozen=True)
class PartitionParams:
    t: int
    s: int
    d: int
    T: int

    def __post_init__(self):
        for name in ("t", "s", "d", "T"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")

    @property
    def width(self) -> int:
        """ts + T, the stride between column blocks of B in exponent space."""
        return self.t * self.s + self.T

    def __str__(self):
        return f"(t={self.t}, s={self.s}, d={self.d}, T={self.T})"


@dataclass(frozen=True)
class ExponentLayout:
    params: PartitionParams
    a_block_exponents: dict[tuple[int, int], int]
    a_mask_exponents: dict[int, int]
    b_block_exponents: dict[tuple[int, int], int]
    b_mask_exponents: dict[int, int]
    desired_exponents: dict[tuple[int, int], int]

    def a_terms(self) -> list[tuple[tuple, int]]:
        """(label, exponent) for every term of f_A: blocks row-major, then masks."""
        terms = [(("A", i, j), e) for (i, j), e in sorted(self.a_block_exponents.items())]
        terms += [(("R", k), e) for k, e in sorted(self.a_mask_exponents.items())]
        return terms

    def b_terms(self) -> list[tuple[tuple, int]]:
        terms = [(("B", i, j), e) for (i, j), e in sorted(self.b_block_exponents.items())]
        terms += [(("S", k), e) for k, e in sorted(self.b_mask_exponents.items())]
        return terms

    def product_terms(self):
        """Yield (a_label, b_label, exponent, target) for every term of h = f_A f_B.

        ``target`` is the output block (i, j) the product contributes to, or
        None for an interference term.
        """
        for la, ea in self.a_terms():
            for lb, eb in self.b_terms():
                target = None
                if la[0] == "A" and lb[0] == "B" and la[2] == lb[1]:
                    target = (la[1], lb[2])
                yield la, lb, ea + eb, target


def build_layout(params: PartitionParams) -> ExponentLayout:
    t, s, d, T = params.t, params.s, params.d, params.T
    w = params.width
    return ExponentLayout(
        params=params,
        a_block_exponents={(i, j): (i - 1) * s + j - 1
                           for i in range(1, t + 1) for j in range(1, s + 1)},
        a_mask_exponents={k: t * s + k - 1 for k in range(1, T + 1)},
        b_block_exponents={(i, j): (1 - j) * w + (1 - i)
                           for i in range(1, s + 1) for j in range(1, d + 1)},
        b_mask_exponents={k: -d * w - k + 1 for k in range(1, T + 1)},
        desired_exponents={(i, j): (i - 1) * s + (1 - j) * w
                           for i in range(1, t + 1) for j in range(1, d + 1)},
    )


def is_valid_n(params: PartitionParams, n: int, layout: ExponentLayout | None = None) -> bool:
    """True iff evaluating at an order-n root of unity lets every output block be decoded.

    Checks, with exponents taken mod n: the terms of f_A are pairwise distinct,
    likewise for f_B, the td wanted exponents are pairwise distinct, and no
    product term that does not belong to a given output block shares that
    block's residue.
    """
    if n < 1:
        return False
    layout = layout or build_layout(params)
    if len({e % n for _, e in layout.a_terms()}) != params.width:
        return False
    if len({e % n for _, e in layout.b_terms()}) != params.s * params.d + params.T:
        return False
    wanted = {e % n: ij for ij, e in layout.desired_exponents.items()}
    if len(wanted) != params.t * params.d:
        return False
    for _, _, e, target in layout.product_terms():
        owner = wanted.get(e % n)
        if owner is not None and owner != target:
            return False
    return True


def closed_form_n(params: PartitionParams) -> int:
    """Number of servers given by the closed-form bound (always valid, not always minimal)."""
    t, s, d, T = params.t, params.s, params.d, params.T
    if s == 1:
        return (d + 1) * (t + T) - 1
    return d * s * t + d * T + t * s + T


def minimal_valid_n(params: PartitionParams) -> int:
    layout = build_layout(params)
    bound = closed_form_n(params)
    for n in range(params.t * params.d, bound + 1):
        if is_valid_n(params, n, layout):
            return n
    raise RuntimeError(f"closed-form N={bound} failed validation for {params}; this is a bug")


@dataclass(frozen=True)
class SchemePlan:
    params: PartitionParams
    n: int
    field: PrimeField
    root: RootOfUnity
    layout: ExponentLayout
    decode_exponents: dict[tuple[int, int], int] = dc_field(repr=False)

    @property
    def q(self) -> int:
        return self.field.modulus

    @property
    def alpha(self) -> int:
        return self.root.alpha.value

    def evaluation_points(self) -> list[int]:
        return [self.root.power(i) for i in range(1, self.n + 1)]


def resolve_n(params: PartitionParams, n_choice: NChoice = "minimal") -> int:
    if n_choice == "minimal":
        return minimal_valid_n(params)
    if n_choice == "closed-form":
        return closed_form_n(params)
    if isinstance(n_choice, int) and not isinstance(n_choice, bool):
        if not is_valid_n(params, n_choice):
            raise InvalidEvaluationOrder(f"N={n_choice} does not separate the output blocks for {params}")
        return n_choice
    raise ValueError(f"unknown N choice {n_choice!r}")


def make_plan(params: PartitionParams, n_choice: NChoice = "minimal", min_q: int = 2) -> SchemePlan:
    n = resolve_n(params, n_choice)
    field = PrimeField(find_field_modulus(n, min_q))
    root = nth_root_of_unity(field, n)
    layout = build_layout(params)
    s, w = params.s, params.width
    delta = {(i, j): -(i - 1) * s - (1 - j) * w for (i, j) in layout.desired_exponents}
    return SchemePlan(params, n, field, root, layout, delta)


@dataclass(frozen=True)
class ShareSet:
    """Per-server uploads; index 0 belongs to server 1."""

    share_a: tuple[DenseMatrix, ...]
    share_b: tuple[DenseMatrix, ...]

    def __len__(self):
        return len(self.share_a)

    def for_server(self, i: int) -> tuple[DenseMatrix, DenseMatrix]:
        if not 1 <= i <= len(self):
            raise IndexError(f"server index {i} outside [1, {len(self)}]")
        return self.share_a[i - 1], self.share_b[i - 1]


def _check_shapes(a: DenseMatrix, b: DenseMatrix, plan: SchemePlan):
    p = plan.params
    if a.field != plan.field or b.field != plan.field:
        raise ValueError(f"inputs must be reduced into GF({plan.q})")
    if a.cols != b.rows:
        raise DimensionError(f"A is {a.shape} but B is {b.shape}")
    for label, size, parts in (("A rows", a.rows, p.t), ("A cols", a.cols, p.s),
                               ("B cols", b.cols, p.d)):
        if size % parts:
            raise DimensionError(f"{label}: {size} is not divisible by {parts}")


def _evaluate(plan: SchemePlan, coefficients: list[DenseMatrix], exponents: list[int]) -> list[DenseMatrix]:
    """Evaluate sum_k C_k x**e_k at x = alpha**1 .. alpha**N, all at once."""
    rows, cols = coefficients[0].shape
    q, n = plan.q, plan.n
    vander = np.array([[plan.root.power(i * e) for e in exponents] for i in range(1, n + 1)],
                      dtype=object)
    stacked = np.stack([c.values.reshape(-1) for c in coefficients])
    evals = mod_matmul(vander.astype(stacked.dtype), stacked, q)
    return [DenseMatrix(plan.field, evals[i].reshape(rows, cols)) for i in range(n)]


def _encode_with_masks(a: DenseMatrix, b: DenseMatrix, plan: SchemePlan,
                       r_masks: list[DenseMatrix], s_masks: list[DenseMatrix]) -> ShareSet:
    """Encode with caller-supplied masks. Test hook; use :func:`encode` in production."""
    _check_shapes(a, b, plan)
    p, layout = plan.params, plan.layout
    if len(r_masks) != p.T or len(s_masks) != p.T:
        raise ValueError(f"expected {p.T} masks per side")
    ga, gb = partition(a, p.t, p.s), partition(b, p.s, p.d)
    coeff_a, exp_a = [], []
    for (label, e) in layout.a_terms():
        coeff_a.append(ga[label[1] - 1, label[2] - 1] if label[0] == "A" else r_masks[label[1] - 1])
        exp_a.append(e)
    coeff_b, exp_b = [], []
    for (label, e) in layout.b_terms():
        coeff_b.append(gb[label[1] - 1, label[2] - 1] if label[0] == "B" else s_masks[label[1] - 1])
        exp_b.append(e)
    for m in r_masks:
        if m.shape != ga.block_shape:
            raise DimensionError(f"mask R has shape {m.shape}, expected {ga.block_shape}")
    for m in s_masks:
        if m.shape != gb.block_shape:
            raise DimensionError(f"mask S has shape {m.shape}, expected {gb.block_shape}")
    return ShareSet(tuple(_evaluate(plan, coeff_a, exp_a)), tuple(_evaluate(plan, coeff_b, exp_b)))


def draw_masks(a: DenseMatrix, b: DenseMatrix, plan: SchemePlan, rng: np.random.Generator):
    p, q = plan.params, plan.q
    shape_r = (a.rows // p.t, a.cols // p.s)
    shape_s = (b.rows // p.s, b.cols // p.d)
    r_masks = [DenseMatrix(plan.field, uniform_residues(rng, q, shape_r)) for _ in range(p.T)]
    s_masks = [DenseMatrix(plan.field, uniform_residues(rng, q, shape_s)) for _ in range(p.T)]
    return r_masks, s_masks


def encode(a: DenseMatrix, b: DenseMatrix, plan: SchemePlan, rng: np.random.Generator) -> ShareSet:
    _check_shapes(a, b, plan)
    r_masks, s_masks = draw_masks(a, b, plan, rng)
    return _encode_with_masks(a, b, plan, r_masks, s_masks)


def server_multiply(share_a: DenseMatrix, share_b: DenseMatrix) -> DenseMatrix:
    return share_a @ share_b


def decode(products: list[DenseMatrix], plan: SchemePlan) -> DenseMatrix:
    p, n, q = plan.params, plan.n, plan.q
    if len(products) != n:
        raise ValueError(f"decoding needs all {n} server responses, got {len(products)}")
    shape = products[0].shape
    for i, h in enumerate(products, start=1):
        if h.shape != shape:
            raise DimensionError(f"response from server {i} has shape {h.shape}, expected {shape}")
        if h.field != plan.field:
            raise ValueError(f"response from server {i} is not over GF({q})")
    targets = sorted(plan.decode_exponents)
    weights = np.array([[plan.root.power(i * plan.decode_exponents[ij]) for i in range(1, n + 1)]
                        for ij in targets], dtype=object)
    stacked = np.stack([h.values.reshape(-1) for h in products])
    sums = mod_matmul(weights.astype(stacked.dtype), stacked, q)
    n_inv = plan.field.inv(n)
    blocks = [[None] * p.d for _ in range(p.t)]
    for row, (i, j) in zip(sums, targets):
        blocks[i - 1][j - 1] = DenseMatrix(plan.field, row.reshape(shape)).scale(n_inv)
    return reassemble(BlockGrid(blocks))


def plan_for_modulus(params: PartitionParams, q: int) -> SchemePlan:
    """Plan over a fixed prime field, using the smallest valid N that divides q - 1."""
    field = PrimeField(q)
    layout = build_layout(params)
    divisors = [1]
    for p in prime_factors(q - 1):
        m, k = q - 1, 0
        while m % p == 0:
            m //= p
            k += 1
        divisors = [x * p ** e for x in divisors for e in range(k + 1)]
    for n in sorted(divisors):
        if is_valid_n(params, n, layout):
            plan = make_plan(params, n, min_q=q)
            assert plan.field == field
            return plan
    raise InvalidEvaluationOrder(f"no valid N for {params} divides q - 1 = {q - 1}")
