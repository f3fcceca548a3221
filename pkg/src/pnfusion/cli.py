"""Command-line interface.

Exit codes: 0 ok, 1 parse error, 2 validation error, 3 numeric error.
Data goes to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import math
import re
import sys
from pathlib import Path

from .engine import Trace
from .errors import (
    FormulaError,
    GadgetError,
    NetError,
    ParamConflict,
    ScenarioError,
    SimulationError,
    WrongEndpointClass,
)
from .formula import emit, iter_formula_lines, parse, parse_with_warnings, unit_lines
from .fusion import compose
from .net import validate
from .scenario import loads
from .speed import format_number

EXIT_PARSE, EXIT_INVALID, EXIT_NUMERIC = 1, 2, 3


class _Exit(Exception):
    def __init__(self, code: int, lines: list[str]):
        self.code = code
        self.lines = lines


def _read(path: str) -> str:
    try:
        return sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _Exit(EXIT_PARSE, [f"{path}: {exc.strerror}"]) from None


def _warning(path: str, text: str) -> str:
    m = re.match(r"offset (\d+): (.*)", text)
    return f"{path}:{m.group(1)}: warning: {m.group(2)}" if m else f"{path}: warning: {text}"


def _load_net(path: str):
    text = _read(path)
    try:
        net, warnings = parse_with_warnings(text)
    except FormulaError as exc:
        raise _Exit(EXIT_PARSE, [exc.diagnostic.render(path)]) from None
    for w in warnings:
        print(_warning(path, w), file=sys.stderr)
    problems = validate(net)
    if problems:
        raise _Exit(EXIT_INVALID, [f"{path}: {d}" for d in problems])
    return net


def _node_table(net) -> list[str]:
    out = [f"nodes {len(net)}  places {len(net.places)}  "
           f"transitions {len(net.transitions)}  arcs {len(net.arcs)}"]
    for pid, p in sorted(net.places.items()):
        flags = "".join(f" {f}" for f in ("display", "boost") if getattr(p, f))
        out.append(f"place {pid} m={format_number(p.m)} {p.kind}{flags}")
    for tid, t in sorted(net.transitions.items()):
        out.append(f"transition {tid} v={t.speed} d={format_number(t.delay)} {t.kind}")
    for a in net.sorted_arcs():
        out.append(f"arc {a.source} -> {a.target} {a.kind} k={format_number(a.k)} w={a.w}")
    return out


def cmd_parse(args) -> int:
    net = _load_net(args.file)
    print("\n".join(_node_table(net)))
    print(f"formula {emit(net)}")
    return 0


def cmd_emit(args) -> int:
    print(emit(_load_net(args.file)))
    return 0


def cmd_defuse(args) -> int:
    for line in unit_lines(_load_net(args.file)):
        print(line)
    return 0


def cmd_compose(args) -> int:
    pieces = []
    for n, line in enumerate(iter_formula_lines(_read(args.file).splitlines()), 1):
        try:
            pieces.append(parse(line))
        except FormulaError as exc:
            raise _Exit(EXIT_PARSE, [f"{args.file}: line {n}: {exc.diagnostic.message}"]) from None
    try:
        net = compose(pieces)
    except (FormulaError, ParamConflict, WrongEndpointClass) as exc:
        raise _Exit(EXIT_INVALID, [f"{args.file}: {exc}"]) from None
    print(emit(net))
    return 0


def _summary(trace: Trace, columns: list[str]) -> list[str]:
    last = trace.rows[-1]
    names = trace.columns
    finals = " ".join(f"{c}={format(last[names.index(c)], '.9g')}"
                      for c in names if c.startswith("p"))
    lines = [f"steps {last[0]} time {format(last[1], '.9g')} final {finals}"]
    for c in columns:
        values = [v for v in trace.column(c) if not math.isnan(v)]
        if values:
            lines.append(f"{c} min={format(min(values), '.9g')} max={format(max(values), '.9g')}")
    return lines


def cmd_run(args) -> int:
    text = _read(args.file)
    try:
        scenario = loads(text)
    except FormulaError as exc:
        raise _Exit(EXIT_PARSE, [exc.diagnostic.render(args.file)]) from None
    except ScenarioError as exc:
        raise _Exit(EXIT_PARSE, [f"{args.file}: {exc}"]) from None
    except (NetError, GadgetError) as exc:
        raise _Exit(EXIT_INVALID, [f"{args.file}: {exc}"]) from None
    for w in scenario.warnings:
        print(_warning(args.file, w), file=sys.stderr)
    if args.steps is not None and args.steps < 0:
        raise _Exit(EXIT_INVALID, ["--steps must be nonnegative"])
    if args.dt is not None and not args.dt > 0:
        raise _Exit(EXIT_INVALID, ["--dt must be positive"])
    try:
        trace = scenario.run(args.steps, args.dt, as_policy=args.policy)
    except SimulationError as exc:
        raise _Exit(EXIT_NUMERIC, [f"{args.file}: {type(exc).__name__}: {exc}"]) from None
    except GadgetError as exc:
        raise _Exit(EXIT_INVALID, [f"{args.file}: {exc}"]) from None
    watch = [c for c in trace.columns if c not in ("step", "time")]
    if args.watch:
        wanted = [c.strip() for c in args.watch.split(",") if c.strip()]
        unknown = [c for c in wanted if c not in trace.columns]
        if unknown:
            raise _Exit(EXIT_INVALID, [f"unknown columns: {', '.join(unknown)}"])
        watch = [c for c in wanted if c not in ("step", "time")]
    csv = trace.to_csv(watch if args.watch else None)
    target = args.trace or scenario.trace
    if target and target != "-":
        Path(target).write_text(csv, encoding="utf-8")
    else:
        sys.stdout.write(csv)
    print("\n".join(_summary(trace, watch)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pnfusion", description="Formula nets with fusion, gadgets and simulation.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_ in (
        ("parse", cmd_parse, "print the node table and canonical formula"),
        ("emit", cmd_emit, "print the canonical formula"),
        ("defuse", cmd_defuse, "print one structural unit per line"),
        ("compose", cmd_compose, "fuse unit lines back into one formula"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("file", help="formula file, or - for stdin")
        p.set_defaults(func=fn)
    p = sub.add_parser("run", help="run a scenario and write its CSV trace")
    p.add_argument("file")
    p.add_argument("--steps", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--trace", help="CSV output path; - for stdout")
    p.add_argument("--watch", help="comma-separated columns to keep, e.g. p2,t5_v")
    p.add_argument("--policy", action="store_true",
                   help="run each solver as the equivalent policy hook instead of a net fragment")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Exit as exc:
        for line in exc.lines:
            print(line, file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
