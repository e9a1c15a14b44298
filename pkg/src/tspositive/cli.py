"""Command-line front end.

::

    tspositive analyze   --system sys.json
    tspositive stabilize --system sys.json [--margin 1e-6]
    tspositive simulate  --system sys.json --x0 1,1 --t-end 5 --out traj.csv

Exit codes: ``analyze`` 0 Stable, 10 Unstable, 11 Inconclusive; ``stabilize``
0 Feasible, 20 Infeasible, 21 NotStabilizable; 2 for any error, reported as a
JSON object on standard output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, schemas
from .errors import DomainError, ParseError, TSPositiveError, ValidationError
from .positivity import check_positive_system, lint_near_zero
from .serialize import dumps
from .simulate import simulate
from .stability import Verdict, assess_stability
from .stabilize import Status, positive_stabilize
from .timescale import TimeScale, make_timescale

EXIT_ERROR = 2
ANALYZE_CODES = {Verdict.STABLE: 0, Verdict.UNSTABLE: 10, Verdict.INCONCLUSIVE: 11}
STABILIZE_CODES = {Status.FEASIBLE: 0, Status.INFEASIBLE: 20, Status.NOT_STABILIZABLE: 21}


@dataclass(frozen=True)
class SystemFile:
    A: np.ndarray
    B: np.ndarray
    ts: TimeScale
    timescale: dict
    metadata: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]


def _matrix(value, name, rows=None):
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise ValidationError(f"{name} must be a non-empty list of rows", field=name)
    width = len(value[0])
    for r in value:
        if len(r) != width or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in r
        ):
            raise ValidationError(f"{name} must be a rectangular matrix of numbers", field=name)
    M = np.array(value, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValidationError(f"{name} has non-finite entries", field=name)
    if rows is not None and M.shape[0] != rows:
        raise ValidationError(f"{name} has {M.shape[0]} rows, expected {rows}", field=name)
    return M


def parse_system_file(source) -> SystemFile:
    """Parse a system file from a path or from JSON text.

    Raises
    ------
    ParseError
        Malformed JSON (with line and column) or a missing required field.
    ValidationError
        Inconsistent dimensions or an invalid time scale; ``field`` names the culprit.
    """
    if isinstance(source, Path) or (
        isinstance(source, str) and not source.lstrip().startswith("{") and os.path.exists(source)
    ):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc.msg}", exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise ParseError("system file must be a JSON object")
    for key in ("A", "timescale"):
        if key not in doc:
            raise ParseError(f"missing required field {key!r}", field=key)
    A = _matrix(doc["A"], "A")
    if A.shape[0] != A.shape[1]:
        raise ValidationError(f"A must be square, got {A.shape[0]}x{A.shape[1]}", field="A")
    n = A.shape[0]
    B = _matrix(doc["B"], "B", rows=n) if doc.get("B") is not None else np.zeros((n, 1))
    if not isinstance(doc["timescale"], dict):
        raise ValidationError("timescale must be an object", field="timescale")
    ts = make_timescale(doc["timescale"])
    meta = doc.get("metadata", {})
    if not isinstance(meta, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in meta.items()
    ):
        raise ValidationError("metadata must map strings to strings", field="metadata")
    return SystemFile(A, B, ts, doc["timescale"], dict(meta))


def _vector(text, name, size):
    try:
        v = np.array([float(x) for x in text.split(",")], dtype=float)
    except ValueError:
        raise ValidationError(f"{name} must be comma-separated numbers, got {text!r}", field=name)
    if v.size != size:
        raise ValidationError(f"{name} needs {size} values, got {v.size}", field=name)
    return v


def _emit(text, out):
    if out:
        Path(out).write_text(text + ("" if text.endswith("\n") else "\n"), encoding="utf-8")
    else:
        sys.stdout.write(text + ("" if text.endswith("\n") else "\n"))


def _error(exc):
    obj = {"error": type(exc).__name__, "message": str(exc)}
    for key in ("assumption", "field", "line", "column"):
        if getattr(exc, key, None) is not None:
            obj[key] = getattr(exc, key)
    sys.stdout.write(dumps(obj) + "\n")
    return EXIT_ERROR


def cmd_analyze(args):
    sysf = parse_system_file(args.system)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        near = lint_near_zero(sysf.A, sysf.B, eps=args.tol)
    pos = check_positive_system(sysf.A, sysf.B, sysf.ts)
    stab = assess_stability(sysf.A, sysf.ts)
    report = {"positivity": pos.to_json(), "stability": stab.to_json()}
    if near:
        report["near_zero_entries"] = [list(h) for h in near]
    _emit(dumps(report), args.out)
    return ANALYZE_CODES[stab.verdict]


def cmd_stabilize(args):
    sysf = parse_system_file(args.system)
    if sysf.m != 1:
        raise DomainError(
            f"stabilize handles single-input systems only (m = 1), got m = {sysf.m}"
        )
    res = positive_stabilize(sysf.A, sysf.B, sysf.ts, margin=args.margin, recenter=not args.vertex)
    _emit(dumps(res.to_json()), args.out)
    return STABILIZE_CODES[res.status]


def cmd_simulate(args):
    sysf = parse_system_file(args.system)
    if args.x0 is None:
        raise ValidationError("simulate needs --x0", field="x0")
    x0 = _vector(args.x0, "x0", sysf.n)
    A, B, u = sysf.A, sysf.B, None
    if args.gain is not None:
        K = _vector(args.gain, "gain", sysf.n).reshape(1, -1)
        if sysf.m != 1:
            raise DomainError("--gain needs a single-input system")
        A, B = A + B @ K, None
    elif args.u is not None:
        u = _vector(args.u, "u", sysf.m)
    traj = simulate(
        A, B, sysf.ts, x0, u=u, t0=args.t0, t_end=args.t_end, dense_cells=args.dense_cells
    )
    _emit(traj.to_csv(), args.out)
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="tspositive",
        description="Positivity, stability and positive stabilization on time scales.",
    )
    p.add_argument("--version", action="version", version=f"tspositive {__version__}")
    p.add_argument("--schema", action="store_true", help="print the JSON schemas and exit")
    sub = p.add_subparsers(dest="command")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--system", required=True, help="system file (JSON)")
    common.add_argument("--out", help="output file (default: standard output)")

    a = sub.add_parser("analyze", parents=[common], help="positivity and stability report")
    a.add_argument("--tol", type=float, default=1e-12, help="near-zero lint threshold")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("stabilize", parents=[common], help="positive stabilizing gain")
    s.add_argument("--margin", type=float, default=1e-6, help="margin for strict inequalities")
    s.add_argument("--vertex", action="store_true", help="return the LP vertex, no recentering")
    s.set_defaults(func=cmd_stabilize)

    m = sub.add_parser("simulate", parents=[common], help="trajectory as CSV")
    m.add_argument("--x0", help="initial state, comma separated")
    m.add_argument("--u", help="constant input, comma separated (default 0)")
    m.add_argument("--gain", help="feedback gain K, comma separated; simulates A + B K")
    m.add_argument("--t0", type=float, default=None)
    m.add_argument("--t-end", type=float, default=None)
    m.add_argument("--dense-cells", type=int, default=32)
    m.set_defaults(func=cmd_simulate)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.schema:
        sys.stdout.write(json.dumps(schemas.ALL, indent=2) + "\n")
        return 0
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except (TSPositiveError, OSError) as exc:
        return _error(exc)


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
