"""Communication and operation counts, all in exact rational arithmetic."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, fields
from fractions import Fraction

from .scheme import PartitionParams

# The published comparison is for t = s = d = 2, T = 1 on thirteen servers.
COMPARISON_PARAMS = PartitionParams(2, 2, 2, 1)
COMPARISON_N = 13

# Baseline coefficients, per (ab + bc) for upload/encode and per ac for download/decode.
BASELINE_COEFFICIENTS = {
    "GASP": (Fraction(7, 2), Fraction(7, 4), Fraction(28), Fraction(27)),
    "Inner-product": (Fraction(3, 2), Fraction(7), Fraction(12), Fraction(7)),
}


@dataclass(frozen=True)
class CostReport:
    upload_elements: Fraction
    download_elements: Fraction
    encode_ops: Fraction
    decode_ops: Fraction
    total_rate: Fraction


def _check_dims(params: PartitionParams, a: int, b: int, c: int):
    for name, v in (("a", a), ("b", b), ("c", c)):
        if not isinstance(v, int) or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v!r}")
    for name, v, parts, label in (("a", a, params.t, "t"), ("b", b, params.s, "s"), ("c", c, params.d, "d")):
        if v % parts:
            raise ValueError(f"{name}={v} is not divisible by {label}={parts}")


def communication_costs(params: PartitionParams, n: int, a: int, b: int, c: int) -> CostReport:
    """Element and operation counts for one multiplication on ``n`` servers.

    Encoding is Horner evaluation of both encoders at every point; decoding is
    one weighted sum per output block, where the block whose weight is
    alpha**0 skips the scalar multiplications.
    """
    _check_dims(params, a, b, c)
    t, s, d, T = params.t, params.s, params.d, params.T
    a_block = Fraction(a * b, t * s)
    b_block = Fraction(b * c, s * d)
    out_block = Fraction(a * c, t * d)
    upload = n * (a_block + b_block)
    download = n * out_block
    encode_ops = n * (2 * (t * s + T - 1) * a_block + 2 * (s * d + T - 1) * b_block)
    decode_ops = (t * d - 1) * 2 * n * out_block + (n + 1) * out_block
    rate = Fraction(a * c) / (upload + download)
    return CostReport(upload, download, encode_ops, decode_ops, rate)


def closed_form_rate(params: PartitionParams, n: int, a: int, b: int, c: int) -> Fraction:
    t, s, d = params.t, params.s, params.d
    return 1 / (n * (Fraction(b, c * t * s) + Fraction(b, a * s * d) + Fraction(1, t * d)))


@dataclass(frozen=True)
class ComparisonRow:
    scheme: str
    upload: Fraction
    download: Fraction
    encode: Fraction
    decode: Fraction


def comparison_table(a: int, b: int, c: int) -> list[ComparisonRow]:
    """Costs of this scheme against the two published baselines at t = s = d = 2, T = 1."""
    for name, v in (("a", a), ("b", b), ("c", c)):
        if not isinstance(v, int) or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if v % 4:
            raise ValueError(f"{name}={v} must be divisible by 4 for the comparison")
    ours = communication_costs(COMPARISON_PARAMS, COMPARISON_N, a, b, c)
    rows = [ComparisonRow("Proposed", ours.upload_elements, ours.download_elements,
                          ours.encode_ops, ours.decode_ops)]
    sym, out = a * b + b * c, a * c
    for name, (up, down, enc, dec) in BASELINE_COEFFICIENTS.items():
        rows.append(ComparisonRow(name, up * sym, down * out, enc * sym, dec * out))
    return rows


def _fmt(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def format_table(rows: list, fmt: str = "text") -> str:
    """Render dataclass rows as aligned text or CSV."""
    header = [f.name for f in fields(rows[0])]
    body = [[v if isinstance(v, str) else _fmt(v) for v in (getattr(r, h) for h in header)] for r in rows]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(body)
        return buf.getvalue()
    widths = [max(len(str(x)) for x in col) for col in zip(header, *body)]
    lines = ["  ".join(str(x).ljust(w) for x, w in zip(line, widths)).rstrip() for line in [header, *body]]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SpeedupVerdict:
    faster: bool
    reason: str

    def __bool__(self):
        return self.faster


def speedup_region(a: int, b: int, c: int) -> SpeedupVerdict:
    """Whether outsourcing at t = s = d = 2, T = 1 beats local 2abc - ac operations.

    Unit cost per transmitted element and per field operation.
    """
    if min(a, b, c) < 1:
        raise ValueError("dimensions must be positive")
    a_min = Fraction(234, 7)
    if a <= a_min:
        return SpeedupVerdict(False, f"a={a} must exceed 234/7")
    b_den = 7 * a - 234
    b_min = Fraction(216 * a, b_den)
    if b <= b_min:
        return SpeedupVerdict(False, f"b={b} must exceed 216a/(7a-234) = {_fmt(b_min)}")
    c_den = 7 * a * b - 216 * a - 234 * b
    if c_den <= 0:
        return SpeedupVerdict(False, "c bound has a non-positive denominator")
    c_min = Fraction(234 * a * b, c_den)
    if c <= c_min:
        return SpeedupVerdict(False, f"c={c} must exceed 234ab/(7ab-216a-234b) = {_fmt(c_min)}")
    return SpeedupVerdict(True, "all three bounds hold")
