"""Plain-text matrix files: a ``rows cols`` header, then one whitespace-separated row per line."""

from __future__ import annotations

from pathlib import Path

from .matrix import DenseMatrix


class MatrixFormatError(ValueError):
    pass


def parse_matrix_text(text: str) -> list[list[int]]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise MatrixFormatError("empty matrix file")
    header = lines[0].split()
    if len(header) != 2:
        raise MatrixFormatError(f"header must be 'rows cols', got {lines[0]!r}")
    try:
        rows, cols = int(header[0]), int(header[1])
    except ValueError:
        raise MatrixFormatError(f"non-integer header {lines[0]!r}") from None
    if rows < 1 or cols < 1:
        raise MatrixFormatError("dimensions must be positive")
    body = lines[1:]
    if len(body) != rows:
        raise MatrixFormatError(f"header declares {rows} rows, found {len(body)}")
    out = []
    for n, line in enumerate(body, start=2):
        try:
            vals = [int(tok) for tok in line.split()]
        except ValueError:
            raise MatrixFormatError(f"line {n}: non-integer entry") from None
        if len(vals) != cols:
            raise MatrixFormatError(f"line {n}: expected {cols} entries, found {len(vals)}")
        if any(v < 0 for v in vals):
            raise MatrixFormatError(f"line {n}: entries must be nonnegative")
        out.append(vals)
    return out


def read_matrix_file(path) -> list[list[int]]:
    return parse_matrix_text(Path(path).read_text())


def format_matrix(m: DenseMatrix) -> str:
    lines = [f"{m.rows} {m.cols}"]
    lines += [" ".join(str(v) for v in row) for row in m.tolist()]
    return "\n".join(lines) + "\n"
