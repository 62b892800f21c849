"""Command-line entry point: ``sdmm plan|multiply|costs|audit|serve``.

Exit codes: 0 success, 1 audit failure, 2 usage, 3 I/O or bind, 4 worker failure.
"""

from __future__ import annotations

import argparse
import itertools
import logging
import secrets
import signal
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import costs, harness, security
from .field import FieldError
from .matrix import DenseMatrix, DimensionError, pad_to_multiple, truncate
from .matrixfile import MatrixFormatError, format_matrix, read_matrix_file
from .scheme import (InvalidEvaluationOrder, PartitionParams, closed_form_n, make_plan,
                     minimal_valid_n, plan_for_modulus)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO, EXIT_WORKER = 0, 1, 2, 3, 4

log = logging.getLogger("sdmm")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"{text} must be >= 1")
    return v


def _n_choice(text: str):
    if text in ("minimal", "closed-form"):
        return text
    try:
        return _positive_int(text)
    except argparse.ArgumentTypeError:
        raise argparse.ArgumentTypeError("expected 'minimal', 'closed-form' or a positive integer") from None


def _add_params(p: argparse.ArgumentParser, with_n: bool = True):
    p.add_argument("--t", type=_positive_int, required=True, help="row blocks of A")
    p.add_argument("--s", type=_positive_int, required=True, help="column blocks of A / row blocks of B")
    p.add_argument("--d", type=_positive_int, required=True, help="column blocks of B")
    p.add_argument("--T", type=_positive_int, required=True, help="number of colluding servers tolerated")
    if with_n:
        p.add_argument("--n", type=_n_choice, default="minimal",
                       help="evaluation order: minimal (default), closed-form, or an explicit N")
        p.add_argument("--min-q", type=int, default=2, help="lower bound on the field modulus")


def _params(args) -> PartitionParams:
    return PartitionParams(args.t, args.s, args.d, args.T)


def _fmt(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def degree_table(plan) -> str:
    """Exponents of f_A across, f_B down; entries of h, with '*' on the decoded ones."""
    layout = plan.layout
    a_terms = sorted(layout.a_terms(), key=lambda term: term[1])
    b_terms = sorted(layout.b_terms(), key=lambda term: -term[1])
    targets = {(la, lb): tgt for la, lb, _, tgt in layout.product_terms()}
    cells = [["+"] + [str(e) for _, e in a_terms]]
    for lb, eb in b_terms:
        row = [str(eb)]
        for la, ea in a_terms:
            row.append(f"{ea + eb}{'*' if targets[(la, lb)] else ''}")
        cells.append(row)
    width = max(len(c) for row in cells for c in row)
    return "\n".join(" ".join(c.rjust(width) for c in row) for row in cells) + "\n"


def cmd_plan(args) -> int:
    params = _params(args)
    plan = make_plan(params, args.n, args.min_q)
    n_min, n_closed = minimal_valid_n(params), closed_form_n(params)
    m = params.t * params.s * params.d
    rate = costs.communication_costs(params, plan.n, m, m, m).total_rate
    mark = lambda n: " (selected)" if plan.n == n else ""  # noqa: E731
    out = sys.stdout
    out.write(f"params: t={params.t} s={params.s} d={params.d} T={params.T}\n")
    out.write(f"N(minimal)={n_min}{mark(n_min)}\n")
    out.write(f"N(closed-form)={n_closed}{mark(n_closed)}\n")
    if plan.n not in (n_min, n_closed):
        out.write(f"N(explicit)={plan.n} (selected)\n")
    out.write(f"q={plan.q}\nalpha={plan.alpha}\n")
    out.write(f"rate(a=b=c)={_fmt(rate)}\n")
    out.write("decode exponents (mod N): " + ", ".join(
        f"{ij}->{e % plan.n}" for ij, e in sorted(plan.decode_exponents.items())) + "\n")
    out.write("degree table:\n" + degree_table(plan))
    return EXIT_OK


def _load(path: str) -> list[list[int]]:
    try:
        return read_matrix_file(path)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc}") from exc
    except MatrixFormatError as exc:
        raise CliError(EXIT_IO, f"{path}: {exc}") from exc


def _to_field(raw: list[list[int]], plan, name: str) -> DenseMatrix:
    big = max(max(r) for r in raw)
    if big >= plan.q:
        log.warning("%s has entries >= q=%d; reducing mod q", name, plan.q)
    return DenseMatrix(plan.field, np.array(raw, dtype=object))


def cmd_multiply(args) -> int:
    params = _params(args)
    raw_a, raw_b = _load(args.a_file), _load(args.b_file)
    plan = make_plan(params, args.n, args.min_q)
    a, b = _to_field(raw_a, plan, "A"), _to_field(raw_b, plan, "B")
    if a.cols != b.rows:
        raise CliError(EXIT_USAGE, f"A is {a.rows}x{a.cols} but B is {b.rows}x{b.cols}")
    out_shape = (a.rows, b.cols)
    if args.pad:
        a = pad_to_multiple(a, params.t, params.s)
        b = pad_to_multiple(b, params.s, params.d)
    bound = max(max(r) for r in raw_a) * max(max(r) for r in raw_b) * len(raw_b)
    if bound >= plan.q:
        log.warning("q=%d may be smaller than the largest entry of the integer product; "
                    "results are exact mod q only (raise --min-q for integer semantics)", plan.q)
    seed = args.seed if args.seed is not None else secrets.randbits(64)
    rng = np.random.default_rng(seed)
    try:
        if args.mode == "local":
            product, _ = harness.run_local(a, b, plan, rng, workers=args.threads)
        else:
            if not args.workers:
                raise CliError(EXIT_USAGE, "--mode remote needs --workers host:port,...")
            endpoints = [harness.WorkerEndpoint.parse(e) for e in args.workers.split(",") if e.strip()]
            product, _ = harness.run_remote(a, b, plan, rng, endpoints, timeout=args.timeout)
    except DimensionError as exc:
        raise CliError(EXIT_USAGE, f"{exc} (use --pad to zero-pad)") from exc
    except harness.WorkerError as exc:
        raise CliError(EXIT_WORKER, str(exc)) from exc
    product = truncate(product, *out_shape)
    report = costs.communication_costs(params, plan.n, a.rows, a.cols, b.cols)
    text = format_matrix(product)
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot write {args.out}: {exc}") from exc
    else:
        sys.stdout.write(text)
    print(f"N={plan.n} q={plan.q} seed={seed} upload={_fmt(report.upload_elements)} "
          f"download={_fmt(report.download_elements)}", file=sys.stderr)
    return EXIT_OK


def cmd_costs(args) -> int:
    params = _params(args)
    if args.compare:
        if params != costs.COMPARISON_PARAMS:
            raise CliError(EXIT_USAGE, "--compare is only defined for t=s=d=2, T=1: "
                                       "the baseline figures are specific to that example")
        rows = costs.comparison_table(args.a, args.b, args.c)
        sys.stdout.write(costs.format_table(rows, args.format))
        return EXIT_OK
    n = make_plan(params, args.n, args.min_q).n
    report = costs.communication_costs(params, n, args.a, args.b, args.c)
    if args.format == "csv":
        sys.stdout.write(costs.format_table([report], "csv"))
    else:
        sys.stdout.write(f"N={n}\n")
        for name, value in vars(report).items():
            sys.stdout.write(f"{name}={_fmt(value)}\n")
    return EXIT_OK


def cmd_audit(args) -> int:
    params = _params(args)
    plan = plan_for_modulus(params, args.q) if args.q else make_plan(params)
    k = params.T if args.collude is None else args.collude
    if k > params.T:
        raise CliError(EXIT_USAGE, f"--collude {k} exceeds T={params.T}")
    print(f"plan: N={plan.n} q={plan.q} alpha={plan.alpha} coalition size={k}")
    subsets = list(itertools.combinations(range(1, plan.n + 1), k))
    ok = True
    for side in ("A", "B"):
        bad = [s for s in subsets if security.rank_mod(security.mask_matrix(plan, s, side), plan.q) != k]
        passed = not bad
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} mask rank side={side} subsets={len(subsets)}"
              + (f" first failure={bad[0]}" if bad else ""))
    work = len(subsets) * plan.q ** params.T
    if k == 0:
        print("PASS exhaustive views (empty coalition sees nothing)")
    elif work > args.budget:
        print(f"SKIP exhaustive views: {len(subsets)} subsets x q^T = {work} exceeds budget {args.budget}",
              file=sys.stderr)
    else:
        failed = [s for s in subsets if not security.exhaustive_security_check(params, plan, s)]
        ok &= not failed
        print(f"{'PASS' if not failed else 'FAIL'} exhaustive views subsets={len(subsets)}"
              + (f" first failure={failed[0]}" if failed else ""))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_serve(args) -> int:
    if not 0 <= args.port <= 65535:
        raise CliError(EXIT_IO, f"port {args.port} outside [0, 65535]")

    def ready(server):
        print(f"listening {server.server_address[0]}:{server.port}", flush=True)

    def stop(signum, frame):
        raise KeyboardInterrupt

    signal.signal(signal.SIGTERM, stop)
    try:
        harness.serve(args.port, args.host, on_ready=ready)
    except KeyboardInterrupt:
        pass
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot bind {args.host}:{args.port}: {exc}") from exc
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdmm", description="Secure distributed matrix multiplication "
                                                              "with root-of-unity grid codes.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="resolve N, q and alpha and print the exponent layout")
    _add_params(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("multiply", help="multiply two matrix files through N servers")
    _add_params(p)
    p.add_argument("--a-file", required=True)
    p.add_argument("--b-file", required=True)
    p.add_argument("--mode", choices=("local", "remote"), default="local")
    p.add_argument("--workers", help="comma-separated host:port list, one per server")
    p.add_argument("--threads", type=_positive_int, default=1, help="local executor threads")
    p.add_argument("--timeout", type=float, default=harness.DEFAULT_TIMEOUT)
    p.add_argument("--seed", type=int)
    p.add_argument("--pad", action="store_true", help="zero-pad non-divisible shapes")
    p.add_argument("--out")
    p.set_defaults(func=cmd_multiply)

    p = sub.add_parser("costs", help="communication and operation counts")
    _add_params(p)
    p.add_argument("--a", type=_positive_int, required=True)
    p.add_argument("--b", type=_positive_int, required=True)
    p.add_argument("--c", type=_positive_int, required=True)
    p.add_argument("--compare", action="store_true", help="compare against GASP and inner-product baselines")
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.set_defaults(func=cmd_costs)

    p = sub.add_parser("audit", help="check T-security of the share distribution")
    _add_params(p, with_n=False)
    p.add_argument("--q", type=int, help="audit over this prime field")
    p.add_argument("--collude", type=int, help="coalition size (default T)")
    p.add_argument("--budget", type=int, default=security.DEFAULT_BUDGET,
                   help="max subsets x q^T evaluations for the exhaustive check")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("serve", help="run a worker")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ValueError, FieldError, InvalidEvaluationOrder) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
