"""Command-line front end.

Matrix files use a small header-plus-entries grammar::

    vars: x y z
    rows: 3
    cols: 3
    [1,1] = x^2 - 1/2
    [2,3] = (x - y*z)*(z + 1)

Entries are 1-indexed and default to 0 when omitted; `#` starts a line
comment.  Subcommands: `check` (equivalence verdict), `form` (theoretical
Smith form), `reduce` (constructive witnesses), `verify` (check a witness
triple).  `--json` switches every report to a versioned machine-readable
document that parses back losslessly.

Exit codes: 0 equivalent/success, 1 not-equivalent (or a failed verify),
2 unsupported determinant shape, 3 parse or usage error, 4 internal
failure (completion-not-found, kernel-not-ZLP, consistency violations).
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

from . import polymat
from .criteria import (
    ChainShape,
    DetShape,
    EquivalenceReport,
    LinearForm,
    LinearShape,
    UnivariateDrShape,
    UnsupportedShape,
    check_equivalence,
    verify_witness,
)
from .errors import (
    InternalConsistencyError,
    ParseError,
    ReductionFailure,
    SmitheqError,
    UsageError,
)
from .polymat import PolyMatrix
from .polyring import DEGREVLEX, LEX, Polynomial, VarSet, parse_polynomial, poly_to_text
from .reduction import ReductionTrace, TraceStep, reduce_to_smith

FORMAT_VERSION = 1

EXIT_EQUIVALENT = 0
EXIT_NOT_EQUIVALENT = 1
EXIT_UNSUPPORTED = 2
EXIT_PARSE_USAGE = 3
EXIT_INTERNAL = 4


# -- matrix files ---------------------------------------------------------------


def parse_matrix(text: str) -> PolyMatrix:
    """Parse the matrix-file grammar; errors carry line/column locations."""
    vars_decl = rows_decl = cols_decl = None
    entries: dict = {}
    entry_lines: list = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        if stripped.startswith("vars:"):
            if vars_decl is not None:
                raise ParseError("duplicate vars: header", lineno, 1)
            names = stripped[len("vars:"):].split()
            if not names:
                raise ParseError("vars: header declares no variables", lineno, 1)
            try:
                vars_decl = VarSet(names)
            except UsageError as exc:
                raise ParseError(str(exc), lineno, 1) from None
            continue
        if stripped.startswith("rows:") or stripped.startswith("cols:"):
            key = stripped[:5]
            value = stripped[5:].strip()
            if not value.isdigit() or int(value) <= 0:
                raise ParseError(f"{key} needs a positive integer, got {value!r}", lineno, 1)
            if key == "rows:":
                if rows_decl is not None:
                    raise ParseError("duplicate rows: header", lineno, 1)
                rows_decl = int(value)
            else:
                if cols_decl is not None:
                    raise ParseError("duplicate cols: header", lineno, 1)
                cols_decl = int(value)
            continue
        if stripped.startswith("["):
            entry_lines.append((lineno, line))
            continue
        raise ParseError(f"unrecognized line: {stripped!r}", lineno, 1)
    if vars_decl is None or rows_decl is None or cols_decl is None:
        raise ParseError("matrix file needs vars:, rows: and cols: headers before entries", 1, 1)
    for lineno, line in entry_lines:
        head, eq, expr = line.partition("=")
        if not eq:
            raise ParseError("entry line is missing '='", lineno, 1)
        spec = head.strip()
        if not (spec.startswith("[") and spec.endswith("]")):
            raise ParseError(f"malformed entry index {spec!r}", lineno, 1)
        parts = spec[1:-1].split(",")
        if len(parts) != 2 or not all(p.strip().isdigit() for p in parts):
            raise ParseError(f"malformed entry index {spec!r}", lineno, 1)
        i, j = (int(p.strip()) for p in parts)
        if not (1 <= i <= rows_decl and 1 <= j <= cols_decl):
            raise ParseError(f"index [{i},{j}] outside {rows_decl}x{cols_decl}", lineno, 1)
        if (i, j) in entries:
            raise ParseError(f"duplicate entry [{i},{j}]", lineno, 1)
        col_offset = line.index("=") + 1
        try:
            entries[(i, j)] = parse_polynomial(expr, vars_decl)
        except ParseError as exc:
            raise ParseError(
                f"in entry [{i},{j}]: {exc.args[0]}",
                lineno,
                col_offset + (exc.column or 0),
            ) from None
    zero = Polynomial.zero(vars_decl)
    flat = [entries.get((i, j), zero) for i in range(1, rows_decl + 1) for j in range(1, cols_decl + 1)]
    return PolyMatrix(rows_decl, cols_decl, flat, vars_decl)


def load_matrix(path: str) -> PolyMatrix:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_matrix(fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


# -- serialization ------------------------------------------------------------------


def matrix_to_lists(M: PolyMatrix) -> list:
    return [[poly_to_text(M[i, j]) for j in range(M.cols)] for i in range(M.rows)]


def matrix_from_lists(rows: list, vs: VarSet) -> PolyMatrix:
    entries = [parse_polynomial(e, vs) for row in rows for e in row]
    return PolyMatrix(len(rows), len(rows[0]), entries, vs)


def shape_to_json(shape: DetShape) -> dict:
    if isinstance(shape, ChainShape):
        return {
            "variant": "chain",
            "factors": [{"var": v, "shift": poly_to_text(f)} for v, f in shape.factors],
            "tail": poly_to_text(shape.tail),
            "tail_var": shape.tail_var,
        }
    if isinstance(shape, LinearShape):
        return {
            "variant": "linear",
            "forms": [poly_to_text(f.to_polynomial(shape.tail.varset)) for f in shape.forms],
            "tail": poly_to_text(shape.tail),
        }
    if isinstance(shape, UnivariateDrShape):
        return {"variant": "univariate-dr", "var": shape.var}
    return {"variant": "unsupported", "reason": shape.reason}


def shape_from_json(doc: dict, vs: VarSet) -> DetShape:
    variant = doc["variant"]
    if variant == "chain":
        return ChainShape(
            factors=tuple((f["var"], parse_polynomial(f["shift"], vs)) for f in doc["factors"]),
            tail=parse_polynomial(doc["tail"], vs),
            tail_var=doc["tail_var"],
        )
    if variant == "linear":
        return LinearShape(
            forms=tuple(LinearForm.from_polynomial(parse_polynomial(t, vs)) for t in doc["forms"]),
            tail=parse_polynomial(doc["tail"], vs),
        )
    if variant == "univariate-dr":
        return UnivariateDrShape(var=doc["var"])
    return UnsupportedShape(reason=doc.get("reason", ""))


def report_to_json(report: EquivalenceReport, vs: VarSet) -> dict:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "equivalence-report",
        "vars": list(vs.names),
        "shape": shape_to_json(report.shape),
        "rank": report.rank,
        "d_k": [poly_to_text(d) for d in report.dk_list],
        "jk": list(report.jk_list),
        "verdict": report.verdict,
        "theorem": report.theorem,
        "witnesses": None,
    }
    if report.witnesses is not None:
        U, V = report.witnesses
        doc["witnesses"] = {"u": matrix_to_lists(U), "v": matrix_to_lists(V)}
    return doc


def report_from_json(doc: dict) -> EquivalenceReport:
    vs = VarSet(doc["vars"])
    witnesses = None
    if doc.get("witnesses"):
        witnesses = (
            matrix_from_lists(doc["witnesses"]["u"], vs),
            matrix_from_lists(doc["witnesses"]["v"], vs),
        )
    return EquivalenceReport(
        shape=shape_from_json(doc["shape"], vs),
        rank=doc["rank"],
        per_k=tuple(
            (parse_polynomial(d, vs), bool(j)) for d, j in zip(doc["d_k"], doc["jk"])
        ),
        verdict=doc["verdict"],
        theorem=doc["theorem"],
        witnesses=witnesses,
    )


def trace_to_json(trace: ReductionTrace, vs: VarSet) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "reduction-trace",
        "vars": list(vs.names),
        "input": matrix_to_lists(trace.input),
        "steps": [
            {
                "description": s.description,
                "left": matrix_to_lists(s.left),
                "right": matrix_to_lists(s.right),
            }
            for s in trace.steps
        ],
        "status": "success" if trace.success else "failure",
        "failure": trace.failure,
        "failure_detail": trace.failure_detail,
        "u": matrix_to_lists(trace.u) if trace.u is not None else None,
        "v": matrix_to_lists(trace.v) if trace.v is not None else None,
        "s": matrix_to_lists(trace.s) if trace.s is not None else None,
    }


def trace_from_json(doc: dict) -> ReductionTrace:
    vs = VarSet(doc["vars"])
    trace = ReductionTrace(input=matrix_from_lists(doc["input"], vs))
    for s in doc["steps"]:
        trace.steps.append(
            TraceStep(
                description=s["description"],
                left=matrix_from_lists(s["left"], vs),
                right=matrix_from_lists(s["right"], vs),
            )
        )
    trace.failure = doc.get("failure")
    trace.failure_detail = doc.get("failure_detail", "")
    for name in ("u", "v", "s"):
        value = doc.get(name)
        if value is not None:
            setattr(trace, name, matrix_from_lists(value, vs))
    return trace


# -- human rendering -------------------------------------------------------------------


def _format_matrix(M: PolyMatrix, indent: str = "  ") -> str:
    cells = matrix_to_lists(M)
    widths = [max(len(cells[i][j]) for i in range(M.rows)) for j in range(M.cols)]
    lines = []
    for row in cells:
        lines.append(indent + "[ " + "   ".join(c.ljust(w) for c, w in zip(row, widths)) + " ]")
    return "\n".join(lines)


def _render_report_text(report: EquivalenceReport) -> str:
    lines = [f"verdict: {report.verdict}"]
    if report.theorem:
        lines.append(f"criterion: theorem {report.theorem}")
    lines.append(f"rank: {report.rank}")
    shape = report.shape
    if isinstance(shape, ChainShape):
        facs = " * ".join(f"({v} - ({poly_to_text(f)}))" for v, f in shape.factors) or "(none)"
        lines.append(f"shape: chain; factors {facs}; tail {poly_to_text(shape.tail)}")
    elif isinstance(shape, LinearShape):
        forms = ", ".join(poly_to_text(f.to_polynomial(shape.tail.varset)) for f in shape.forms)
        lines.append(f"shape: linear forms [{forms}]; tail {poly_to_text(shape.tail)}")
    elif isinstance(shape, UnivariateDrShape):
        lines.append(f"shape: d_r univariate in {shape.var}")
    else:
        lines.append(f"shape: unsupported ({shape.reason})")
    for k, (d, j) in enumerate(report.per_k, start=1):
        lines.append(f"d_{k} = {poly_to_text(d)}; J_{k} unit ideal: {'yes' if j else 'no'}")
    return "\n".join(lines)


def _render_trace_text(trace: ReductionTrace) -> str:
    lines = []
    if trace.success:
        lines.append("reduction: success")
        for i, s in enumerate(trace.steps, start=1):
            lines.append(f"step {i}: {s.description}")
        lines.append("S =")
        lines.append(_format_matrix(trace.s))
        lines.append("U =")
        lines.append(_format_matrix(trace.u))
        lines.append("V =")
        lines.append(_format_matrix(trace.v))
    else:
        lines.append(f"reduction: failure ({trace.failure})")
        if trace.failure_detail:
            lines.append(trace.failure_detail)
    return "\n".join(lines)


# -- commands ---------------------------------------------------------------------------


def _parse_hints(raw: Sequence[str], vs: VarSet):
    hints = []
    for text in raw:
        p = parse_polynomial(text, vs)
        hints.append(LinearForm.from_polynomial(p))
    return hints


def _cmd_check(args) -> int:
    F = load_matrix(args.file)
    hints = _parse_hints(args.g, F.varset) if args.g else None
    order = LEX if args.order == "lex" else DEGREVLEX
    report = check_equivalence(F, hints=hints, order=order)
    if args.json:
        print(json.dumps(report_to_json(report, F.varset), indent=2))
    else:
        print(_render_report_text(report))
    if report.verdict == "equivalent":
        return EXIT_EQUIVALENT
    if report.verdict == "not-equivalent":
        return EXIT_NOT_EQUIVALENT
    return EXIT_UNSUPPORTED


def _cmd_form(args) -> int:
    F = load_matrix(args.file)
    inv = polymat.theoretical_smith(F)
    S = inv.as_matrix(F.varset)
    if args.json:
        doc = {
            "format_version": FORMAT_VERSION,
            "kind": "smith-form",
            "vars": list(F.varset.names),
            "rank": inv.rank,
            "invariant_factors": [poly_to_text(f) for f in inv.factors],
            "s": matrix_to_lists(S),
        }
        print(json.dumps(doc, indent=2))
    else:
        print(f"rank: {inv.rank}")
        print("invariant factors: " + ", ".join(poly_to_text(f) for f in inv.factors))
        print("S =")
        print(_format_matrix(S))
    return EXIT_EQUIVALENT


def _cmd_reduce(args) -> int:
    F = load_matrix(args.file)
    hints = _parse_hints(args.g, F.varset) if args.g else None
    report = check_equivalence(F, hints=hints)
    if report.verdict == "not-equivalent":
        if args.json:
            print(json.dumps(report_to_json(report, F.varset), indent=2))
        else:
            print(_render_report_text(report))
            print("not equivalent to its Smith form; no reduction attempted")
        return EXIT_NOT_EQUIVALENT
    trace = reduce_to_smith(F, report.shape, degree_bound=args.degree_bound)
    if args.json:
        print(json.dumps(trace_to_json(trace, F.varset), indent=2))
    else:
        print(_render_trace_text(trace))
    if trace.success:
        return EXIT_EQUIVALENT
    if trace.failure == "unsupported-shape":
        return EXIT_UNSUPPORTED
    return EXIT_INTERNAL


def _cmd_verify(args) -> int:
    F = load_matrix(args.file)
    U = load_matrix(args.u)
    V = load_matrix(args.v)
    S = load_matrix(args.s)
    for name, M in (("u", U), ("v", V), ("s", S)):
        if M.varset != F.varset:
            raise UsageError(f"--{name} declares different variables than the input matrix")
    holds = verify_witness(F, U, V, S, factored=args.factored)
    if args.json:
        doc = {
            "format_version": FORMAT_VERSION,
            "kind": "verify-report",
            "vars": list(F.varset.names),
            "orientation": "factored" if args.factored else "sandwich",
            "holds": holds,
        }
        print(json.dumps(doc, indent=2))
    else:
        rel = "F = U*S*V" if args.factored else "U*F*V = S"
        print(f"{rel} with unimodular U, V: {'holds' if holds else 'does not hold'}")
    return EXIT_EQUIVALENT if holds else EXIT_NOT_EQUIVALENT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smitheq",
        description="Exact Smith-form equivalence tests and reductions for multivariate polynomial matrices.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="decide equivalence to the Smith form")
    p_check.add_argument("file")
    p_check.add_argument("--g", action="append", default=[],
                         help="linear-form hint (repeatable), e.g. --g 'x - y'")
    p_check.add_argument("--order", choices=["lex", "degrevlex"], default="lex",
                         help="monomial order for the Groebner tests (verdict is order-independent)")
    p_check.add_argument("--json", action="store_true")
    p_check.set_defaults(func=_cmd_check)

    p_form = sub.add_parser("form", help="print the theoretical Smith form")
    p_form.add_argument("file")
    p_form.add_argument("--json", action="store_true")
    p_form.set_defaults(func=_cmd_form)

    p_reduce = sub.add_parser("reduce", help="construct verified Smith-form witnesses")
    p_reduce.add_argument("file")
    p_reduce.add_argument("--g", action="append", default=[])
    p_reduce.add_argument("--degree-bound", type=int, default=3)
    p_reduce.add_argument("--json", action="store_true")
    p_reduce.set_defaults(func=_cmd_reduce)

    p_verify = sub.add_parser("verify", help="verify a witness triple U, V, S")
    p_verify.add_argument("file")
    p_verify.add_argument("--u", required=True)
    p_verify.add_argument("--v", required=True)
    p_verify.add_argument("--s", required=True)
    p_verify.add_argument("--factored", action="store_true",
                          help="check F = U*S*V instead of U*F*V = S")
    p_verify.add_argument("--json", action="store_true")
    p_verify.set_defaults(func=_cmd_verify)
    return parser


def run_command(argv: Sequence[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ParseError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE_USAGE
    except ReductionFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED if exc.marker == "unsupported-shape" else EXIT_INTERNAL
    except (InternalConsistencyError, SmitheqError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main(argv: Sequence[str] | None = None) -> int:
    return run_command(sys.argv[1:] if argv is None else list(argv))


if __name__ == "__main__":
    sys.exit(main())
