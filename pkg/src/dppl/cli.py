"""``dppl check`` and ``dppl run``.

Exit codes: 0 success, 1 type error, 2 I/O or parse error, 3 runtime abort
(invalid distribution parameters, ODE divergence, zero total weight, a
tangent reaching a non-differentiable primitive).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from dppl.ad import NonDifferentiable
from dppl.ast import Infer, RealLit, TupleCon
from dppl.dist import InvalidDistribution
from dppl.eval import Machine, RunState, StuckError
from dppl.infer import EmpiricalDist, materialize, toplevel_stream
from dppl.machine import Evaluator, InferV
from dppl.ode import OdeConfig, OdeDiverged
from dppl.parser import ParseError, SourceProgram, parse_with_positions
from dppl.pretty import pretty
from dppl.runtime import Runtime, RuntimeAbort
from dppl.typer import TypeCheckError, check_program

EXIT_OK, EXIT_TYPE, EXIT_INPUT, EXIT_ABORT = 0, 1, 2, 3
ABORTS = (InvalidDistribution, OdeDiverged, NonDifferentiable, RuntimeAbort, StuckError)


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def load(path: str):
    """Parse a program file; returns (term, positions)."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise CliError(EXIT_INPUT, f"{path}: {err.strerror or err}") from err
    try:
        return parse_with_positions(SourceProgram(text, path))
    except ParseError as err:
        raise CliError(EXIT_INPUT, str(err.diagnostic)) from err


def typecheck(path, t, positions, allow_random=False):
    try:
        return check_program(t, allow_random, positions)
    except TypeCheckError as err:
        pos = err.position or (1, 1)
        raise CliError(EXIT_TYPE, f"{path}:{pos[0]}:{pos[1]}: error: {err.render()}") from err


# ---------------------------------------------------------------------------
# Output


def _real(r) -> str:
    while not isinstance(r, float):
        r = r.primal
    return repr(r)


def _cells(v) -> list:
    if isinstance(v, RealLit):
        return [_real(v.r)]
    if isinstance(v, TupleCon):
        out = []
        for e in v.elems:
            out.extend(_cells(e))
        return out
    return [pretty(v)]


def _names(v, name) -> list:
    if isinstance(v, TupleCon) and v.elems:
        out = []
        for i, e in enumerate(v.elems, 1):
            out.extend(_names(e, f"{name}.{i}"))
        return out
    return [name]


def table_rows(v):
    """Rows of a tuple of equal-arity tuples of reals, else None."""
    if not (isinstance(v, TupleCon) and v.elems):
        return None
    arity = None
    for row in v.elems:
        if not (isinstance(row, TupleCon) and row.elems
                and all(isinstance(c, RealLit) for c in row.elems)):
            return None
        if arity not in (None, len(row.elems)):
            return None
        arity = len(row.elems)
    return [[_real(c.r) for c in row.elems] for row in v.elems]


def format_value(v, fmt: str, header: bool) -> str:
    if isinstance(v, EmpiricalDist):
        return v.to_csv(header=header)
    if fmt == "text":
        return pretty(v) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    rows = table_rows(v)
    if rows is not None:
        if header:
            w.writerow([f"column.{i}" for i in range(1, len(rows[0]) + 1)])
        w.writerows(rows)
    else:
        if header:
            w.writerow(_names(v, "value"))
        w.writerow(_cells(v))
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Running


def run_program(t, rt: Runtime, trace=None):
    """Evaluate a checked program under ``rt``.

    Returns a value term, or an EmpiricalDist when the program denotes an
    inferred distribution.  ``trace(step, rule, term)`` receives every
    top-level reduction; tracing uses the small-step engine.
    """
    seed = toplevel_stream(rt.seed)
    if trace is not None or rt.engine == "smallstep":
        v, _ = Machine(rt).eval(t, RunState(0.0, seed), trace=trace)
        if isinstance(v, Infer):
            return materialize(v.f, rt, engine="smallstep", particles=rt.particles)
        return v
    ev = Evaluator(rt)
    v, _ = ev.run_term(t, seed)
    if type(v) is InferV:
        return materialize(ev.readback(v.model), rt, particles=rt.particles)
    return ev.readback(v)


def trace_writer(stream):
    def emit(step, rule, term):
        stream.write(json.dumps({"step": step, "rule": rule, "term": pretty(term)}) + "\n")
    return emit


def cmd_check(args, out) -> int:
    t, positions = load(args.file)
    ty = typecheck(args.file, t, positions, args.allow_random)
    out.write(f"{ty}\n")
    return EXIT_OK


def cmd_run(args, out) -> int:
    t, positions = load(args.file)
    typecheck(args.file, t, positions, args.allow_random)
    try:
        rt = Runtime(
            ode=OdeConfig(args.ode_solver, args.ode_step),
            particles=args.particles,
            nested_particles=args.nested_particles,
            seed=args.seed,
            workers=args.workers,
            engine=args.engine,
        )
    except ValueError as err:
        raise CliError(EXIT_INPUT, f"invalid configuration: {err}") from err
    trace_file = None
    trace = None
    if args.trace:
        if args.trace_out:
            trace_file = open(args.trace_out, "w", encoding="utf-8")
            trace = trace_writer(trace_file)
        else:
            trace = trace_writer(sys.stderr)
    try:
        v = run_program(t, rt, trace)
    except ABORTS as err:
        raise CliError(EXIT_ABORT, f"{args.file}: runtime error: {err}") from err
    finally:
        if trace_file is not None:
            trace_file.close()
    text = format_value(v, args.format, args.header)
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as err:
            raise CliError(EXIT_INPUT, f"{args.out}: {err.strerror or err}") from err
    else:
        out.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dppl", description="Type-check and run CoreDPPL programs.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="type-check a program and print its type")
    c.add_argument("file")
    c.add_argument("--allow-random", action="store_true",
                   help="accept programs whose top-level effect is random")
    c.set_defaults(func=cmd_check)

    r = sub.add_parser("run", help="type-check and evaluate a program")
    r.add_argument("file")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--particles", type=int, default=1000,
                   help="importance-sampling particles for inferred distributions")
    r.add_argument("--nested-particles", type=int, default=None,
                   help="particles for infer nested inside a model (default: --particles)")
    r.add_argument("--ode-solver", choices=("euler", "rk4"), default="rk4")
    r.add_argument("--ode-step", type=float, default=1e-3)
    r.add_argument("--allow-random", action="store_true")
    r.add_argument("--trace", action="store_true",
                   help="log every reduction step as JSON lines (small-step engine)")
    r.add_argument("--trace-out", default=None, help="trace file (default: stderr)")
    r.add_argument("--out", default=None, help="write the result here instead of stdout")
    r.add_argument("--format", choices=("text", "csv"), default="text")
    r.add_argument("--header", action="store_true", help="emit a CSV header row")
    r.add_argument("--engine", choices=("machine", "smallstep"), default="machine")
    r.add_argument("--workers", type=int, default=1)
    r.set_defaults(func=cmd_run)
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except CliError as err:
        print(err, file=sys.stderr)
        return err.code


if __name__ == "__main__":
    sys.exit(main())
