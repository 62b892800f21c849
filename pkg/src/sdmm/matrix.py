"""Dense matrices over a prime field and the block-grid partition."""

from __future__ import annotations

from collections.abc import Iterable, Sequence

import numpy as np

from .field import FieldElement, PrimeField

_INT64_LIMIT = 1 << 63


class DimensionError(ValueError):
    pass


def storage_dtype(q: int):
    return np.int64 if q < _INT64_LIMIT else object


def reduce_array(values, q: int) -> np.ndarray:
    """Canonical residues of an integer array, stored in the dtype used for modulus ``q``."""
    arr = np.asarray(values)
    if arr.dtype.kind in "iu" and arr.dtype != np.uint64 and q < _INT64_LIMIT:
        return np.mod(arr.astype(np.int64), q)
    if arr.dtype.kind not in "iuO":
        raise TypeError(f"matrix entries must be integers, got dtype {arr.dtype}")
    reduced = np.vectorize(lambda v: int(v) % q, otypes=[object])(arr)
    return reduced.astype(storage_dtype(q))


def mod_matmul(x: np.ndarray, y: np.ndarray, q: int) -> np.ndarray:
    """(x @ y) mod q without overflow.

    Falls back to Python integers whenever the int64 accumulator could wrap.
    """
    inner = x.shape[-1]
    if x.dtype != object and y.dtype != object and (q - 1) ** 2 * max(inner, 1) < _INT64_LIMIT:
        return (x @ y) % q
    out = (x.astype(object) @ y.astype(object)) % q
    return out.astype(storage_dtype(q))


class DenseMatrix:
    """A rows x cols matrix of residues modulo ``field.modulus``."""

    __slots__ = ("field", "values")

    def __init__(self, field: PrimeField, values):
        arr = reduce_array(values, field.modulus)
        if arr.ndim != 2 or 0 in arr.shape:
            raise DimensionError(f"expected a non-empty 2-D array, got shape {arr.shape}")
        arr.setflags(write=False)
        self.field = field
        self.values = arr

    @classmethod
    def zeros(cls, field: PrimeField, rows: int, cols: int) -> DenseMatrix:
        return cls(field, np.zeros((rows, cols), dtype=np.int64))

    @classmethod
    def identity(cls, field: PrimeField, n: int) -> DenseMatrix:
        return cls(field, np.eye(n, dtype=np.int64))

    @classmethod
    def random(cls, field: PrimeField, rows: int, cols: int, rng: np.random.Generator) -> DenseMatrix:
        return cls(field, uniform_residues(rng, field.modulus, (rows, cols)))

    @classmethod
    def from_rows(cls, field: PrimeField, rows: Iterable[Sequence[int]]) -> DenseMatrix:
        return cls(field, np.array([[int(v) % field.modulus for v in r] for r in rows], dtype=object))

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def entries(self) -> list[FieldElement]:
        """Row-major entries as field elements."""
        return [self.field(v) for v in self.values.ravel().tolist()]

    def tolist(self) -> list[list[int]]:
        return [[int(v) for v in row] for row in self.values.tolist()]

    def __getitem__(self, idx) -> FieldElement:
        i, j = idx
        return self.field(int(self.values[i, j]))

    def _check_same(self, other: DenseMatrix):
        if self.field != other.field:
            raise ValueError("matrices live in different fields")
        if self.shape != other.shape:
            raise DimensionError(f"shape mismatch {self.shape} vs {other.shape}")

    def __add__(self, other: DenseMatrix) -> DenseMatrix:
        self._check_same(other)
        return DenseMatrix(self.field, _add(self.values, other.values, self.field.modulus))

    def __sub__(self, other: DenseMatrix) -> DenseMatrix:
        self._check_same(other)
        neg = (-other.values.astype(object)) % self.field.modulus
        return DenseMatrix(self.field, _add(self.values, neg, self.field.modulus))

    def scale(self, c: int) -> DenseMatrix:
        q = self.field.modulus
        return DenseMatrix(self.field, (self.values.astype(object) * (int(c) % q)) % q)

    def __matmul__(self, other: DenseMatrix) -> DenseMatrix:
        if self.field != other.field:
            raise ValueError("matrices live in different fields")
        if self.cols != other.rows:
            raise DimensionError(f"inner dimensions differ: {self.shape} @ {other.shape}")
        return DenseMatrix(self.field, mod_matmul(self.values, other.values, self.field.modulus))

    def __eq__(self, other):
        if not isinstance(other, DenseMatrix):
            return NotImplemented
        return (self.field == other.field and self.shape == other.shape
                and bool(np.all(self.values.astype(object) == other.values.astype(object))))

    __hash__ = None

    def __repr__(self):
        return f"DenseMatrix({self.rows}x{self.cols} over {self.field!r}, {self.tolist()})"


def _add(x: np.ndarray, y: np.ndarray, q: int) -> np.ndarray:
    if x.dtype != object and y.dtype != object and 2 * q < _INT64_LIMIT:
        return (x + y) % q
    return (x.astype(object) + y.astype(object)) % q


def uniform_residues(rng: np.random.Generator, q: int, shape) -> np.ndarray:
    """Exactly uniform draws from [0, q) (numpy uses rejection sampling internally)."""
    draws = rng.integers(0, q, size=shape, dtype=np.uint64)
    if q < _INT64_LIMIT:
        return draws.astype(np.int64)
    return draws.astype(object)


class BlockGrid:
    """A block_rows x block_cols grid of equally shaped matrices."""

    def __init__(self, blocks: Sequence[Sequence[DenseMatrix]]):
        blocks = [list(row) for row in blocks]
        if not blocks or not blocks[0]:
            raise DimensionError("empty block grid")
        width = len(blocks[0])
        if any(len(row) != width for row in blocks):
            raise DimensionError("ragged block grid: rows have different lengths")
        shape = blocks[0][0].shape
        for i, row in enumerate(blocks):
            for j, blk in enumerate(row):
                if blk.shape != shape:
                    raise DimensionError(f"block ({i}, {j}) has shape {blk.shape}, expected {shape}")
        self.blocks = blocks

    @property
    def block_rows(self) -> int:
        return len(self.blocks)

    @property
    def block_cols(self) -> int:
        return len(self.blocks[0])

    @property
    def block_shape(self) -> tuple[int, int]:
        return self.blocks[0][0].shape

    def __getitem__(self, idx) -> DenseMatrix:
        i, j = idx
        return self.blocks[i][j]


def partition(m: DenseMatrix, block_rows: int, block_cols: int) -> BlockGrid:
    if block_rows < 1 or block_cols < 1:
        raise DimensionError("block counts must be positive")
    if m.rows % block_rows:
        raise DimensionError(f"rows: {m.rows} is not divisible by {block_rows}")
    if m.cols % block_cols:
        raise DimensionError(f"cols: {m.cols} is not divisible by {block_cols}")
    h, w = m.rows // block_rows, m.cols // block_cols
    return BlockGrid([
        [DenseMatrix(m.field, m.values[i * h:(i + 1) * h, j * w:(j + 1) * w]) for j in range(block_cols)]
        for i in range(block_rows)
    ])


def reassemble(grid: BlockGrid) -> DenseMatrix:
    field = grid[0, 0].field
    return DenseMatrix(field, np.block([[blk.values for blk in row] for row in grid.blocks]))


def pad_to_multiple(m: DenseMatrix, row_mult: int, col_mult: int) -> DenseMatrix:
    """Zero-pad on the bottom/right so each dimension divides evenly."""
    rows = -(-m.rows // row_mult) * row_mult
    cols = -(-m.cols // col_mult) * col_mult
    if (rows, cols) == m.shape:
        return m
    out = np.zeros((rows, cols), dtype=m.values.dtype)
    out[:m.rows, :m.cols] = m.values
    return DenseMatrix(m.field, out)


def truncate(m: DenseMatrix, rows: int, cols: int) -> DenseMatrix:
    return DenseMatrix(m.field, m.values[:rows, :cols])
