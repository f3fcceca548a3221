"""Line-oriented scenario files.

Sections appear in this order, each optional except ``[net]``::

    [net]       formula text (may span lines)
    [params]    p<id>.m=<num>   p<id>.kind=discrete
                t<id>.v=<expr>  t<id>.d=<num>  t<id>.kind=discrete
                arc <src> <dst>.k=<num>   arc <src> <dst>.w=<int>
    [gadgets]   <rm|rv|em|ev|crm|cem> key=value ...
    [solver]    setpoint=<num> gain=<num> receptor=<name> effector=<name> ...
    [run]       steps=<int> dt=<num> trace=<path>
    [events]    at <step> set p<id>.m=<num>
                at <step> attach|detach <gadget>
                at <step> command <effector> <num>

``#`` starts a comment anywhere. Gadgets and solvers are rebuilt by every
call to :meth:`Scenario.build`, so one scenario can be run many times.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import gadgets as g
from .engine import Event, SetMarking, Trace, run
from .errors import Diagnostic, NetError, ScenarioError
from .formula import parse_with_warnings
from .net import Net, validate
from .solver import SetpointPolicy, build_setpoint_solver, wire
from .speed import parse_speed

SECTIONS = ("net", "params", "gadgets", "solver", "run", "events")

_BUILDERS = {"rm": g.build_rm, "rv": g.build_rv, "em": g.build_em, "ev": g.build_ev,
             "crm": g.build_complex_rm, "cem": g.build_complex_em}
_GADGET_KEYS = {"name", "target", "targets", "cap", "rate", "tau", "k", "m", "rates"}
_SOLVER_KEYS = {"name", "setpoint", "gain", "receptor", "effector", "ref", "ref_gain", "limit"}


@dataclass
class Line:
    number: int
    text: str


@dataclass
class Scenario:
    net: Net
    gadget_specs: list = field(default_factory=list)  # (line, kind, options)
    solver_specs: list = field(default_factory=list)  # (line, options)
    steps: int = 0
    dt: float = 1.0
    trace: str | None = None
    event_specs: list = field(default_factory=list)  # (line, step, verb, args)
    warnings: list = field(default_factory=list)
    net_offset: int = 0

    def build(self, as_policy: bool = False):
        """Fresh ``(net, gadgets, solvers, policies, events)`` ready for :func:`run`.

        With ``as_policy`` every solver is replaced by the equivalent
        :class:`SetpointPolicy`.
        """
        gadgets = {}
        for line, kind, opts in self.gadget_specs:
            gadget = _make_gadget(line, kind, opts)
            if gadget.name in gadgets:
                raise ScenarioError(f"duplicate gadget name {gadget.name!r}", line)
            gadgets[gadget.name] = gadget
        late = {args[0] for _, _, verb, args in self.event_specs if verb == "attach"}
        net, solvers, policies = self.net, [], []
        try:
            for line, opts in self.solver_specs:
                solver, policy = _make_solver(line, opts, gadgets)
                if as_policy:
                    policies.append(policy)
                else:
                    net = wire(net, solver.receptor, solver, solver.effector)
                    solvers.append(solver)
            for name, gadget in gadgets.items():
                if not gadget.attached and name not in late:
                    net = g.attach(net, gadget)
        except g.GadgetError as exc:
            raise NetError([Diagnostic(type(exc).__name__, str(exc))]) from exc
        events = [_make_event(spec, gadgets, net) for spec in self.event_specs]
        return net, list(gadgets.values()), solvers, policies, events

    def run(self, steps: int | None = None, dt: float | None = None,
            as_policy: bool = False) -> Trace:
        net, gadgets, solvers, policies, events = self.build(as_policy)
        return run(net, self.steps if steps is None else steps, self.dt if dt is None else dt,
                   gadgets, solvers, policies, events)


def _num(text: str, line: int, what: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ScenarioError(f"{what}: {text!r} is not a number", line) from None
    if math.isnan(value):
        raise ScenarioError(f"{what} is NaN", line)
    return value


def _int(text: str, line: int, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ScenarioError(f"{what}: {text!r} is not an integer", line) from None


def _options(parts: list[str], line: int, allowed: set[str]) -> dict[str, str]:
    opts = {}
    for part in parts:
        key, eq, value = part.partition("=")
        if not eq or not value:
            raise ScenarioError(f"expected key=value, got {part!r}", line)
        if key not in allowed:
            raise ScenarioError(f"unknown key {key!r}", line)
        opts[key] = value
    return opts


def _optional(value: str | None, line: int, what: str) -> float | None:
    if value is None or value == "unlimited":
        return None
    return _num(value, line, what)


def _make_gadget(line: int, kind: str, opts: dict) -> g.Gadget:
    kw = {}
    if "cap" in opts:
        kw["cap"] = _optional(opts["cap"], line, "cap")
    if "rate" in opts:
        kw["rate"] = _optional(opts["rate"], line, "rate")
    for key, attr in (("tau", "tau"), ("k", "thresh"), ("m", "m_cmd")):
        if key in opts:
            kw[attr] = _num(opts[key], line, key)
    try:
        if kind in ("crm", "cem"):
            if "targets" not in opts:
                raise ScenarioError(f"{kind} needs targets=a,b,...", line)
            targets = [_int(x, line, "target") for x in opts["targets"].split(",")]
            if kind == "cem":
                if "rates" not in opts:
                    raise ScenarioError("cem needs rates=r1,r2,...", line)
                rates = [_num(x, line, "rate") for x in opts["rates"].split(",")]
                return _BUILDERS[kind](targets, rates, name=opts.get("name"), **kw)
            return _BUILDERS[kind](targets, name=opts.get("name"), **kw)
        if "target" not in opts:
            raise ScenarioError(f"{kind} needs target=<id>", line)
        return _BUILDERS[kind](_int(opts["target"], line, "target"), name=opts.get("name"), **kw)
    except g.InvalidParams as exc:
        raise ScenarioError(str(exc), line) from None


def _make_solver(line: int, opts: dict, gadgets: dict):
    for key in ("setpoint", "gain", "receptor", "effector"):
        if key not in opts:
            raise ScenarioError(f"solver needs {key}=", line)

    def gadget(key):
        name = opts[key]
        if name not in gadgets:
            raise ScenarioError(f"unknown gadget {name!r}", line)
        return gadgets[name]

    T = _num(opts["setpoint"], line, "setpoint")
    gain = _num(opts["gain"], line, "gain")
    ref_gain = _num(opts.get("ref_gain", "0"), line, "ref_gain")
    limit = _optional(opts.get("limit"), line, "limit")
    receptor, effector = gadget("receptor"), gadget("effector")
    reference = gadget("ref") if "ref" in opts else None
    try:
        solver = build_setpoint_solver(T, gain, receptor, effector, reference, ref_gain, limit,
                                       opts.get("name"))
    except g.GadgetError as exc:
        raise ScenarioError(str(exc), line) from None
    policy = SetpointPolicy(T, gain, receptor.name, effector,
                            reference.name if reference else None, ref_gain, limit)
    return solver, policy


def _make_event(spec, gadgets: dict, net: Net) -> Event:
    line, at, verb, args = spec
    if verb == "set":
        if args[0] not in net.places:
            raise ScenarioError(f"place {args[0]} is not in the net", line)
        return Event(at, SetMarking(*args))
    name = args[0]
    if name not in gadgets:
        raise ScenarioError(f"unknown gadget {name!r}", line)
    if verb == "attach":
        return Event(at, g.Attach(gadgets[name]))
    if verb == "detach":
        return Event(at, g.Detach(gadgets[name]))
    return Event(at, g.Command(gadgets[name], args[1]))


# ---------------------------------------------------------------- reading


def _sections(text: str) -> tuple[dict, int]:
    found: dict[str, list[Line]] = {}
    current = None
    offset = 0
    pos = 0
    for number, raw in enumerate(text.splitlines(keepends=True), 1):
        body = raw.split("#", 1)[0].strip()
        m = re.fullmatch(r"\[(\w+)\]", body)
        if m:
            name = m.group(1)
            if name not in SECTIONS:
                raise ScenarioError(f"unknown section [{name}]", number)
            if name in found:
                raise ScenarioError(f"section [{name}] repeated", number)
            if found and SECTIONS.index(name) < SECTIONS.index(current):
                raise ScenarioError(f"section [{name}] out of order", number)
            current = name
            found[name] = []
            if name == "net":
                offset = len(text[:pos + len(raw)].encode("utf-8"))
        elif body:
            if current is None:
                raise ScenarioError("text before the first section", number)
            # keep the raw line for the formula so diagnostics keep offsets
            found[current].append(Line(number, raw if current == "net" else body))
        elif current == "net":
            found[current].append(Line(number, raw))
        pos += len(raw)
    return found, offset


def _apply_params(net: Net, lines: list[Line]) -> Net:
    for ln in lines:
        n, text = ln.number, ln.text
        m = re.fullmatch(r"arc\s+(\d+)\s+(\d+)\.([kw])\s*=\s*(\S+)", text)
        if m:
            src, dst = int(m.group(1)), int(m.group(2))
            arcs = [a for a in net.arcs.values() if (a.source, a.target) == (src, dst)]
            if len(arcs) != 1:
                raise ScenarioError(f"no single arc {src}->{dst} in the net", n)
            key = m.group(3)
            value = _num(m.group(4), n, key) if key == "k" else _int(m.group(4), n, key)
            net = net.with_arc(replace(arcs[0], **{key: value}))
            continue
        m = re.fullmatch(r"([pt])(\d+)\.(\w+)\s*=\s*(.+)", text)
        if not m:
            raise ScenarioError(f"cannot read parameter line {text!r}", n)
        cls, nid, attr, value = m.group(1), int(m.group(2)), m.group(3), m.group(4).strip()
        table = net.places if cls == "p" else net.transitions
        if nid not in table:
            raise ScenarioError(f"{'place' if cls == 'p' else 'transition'} {nid} is not in the net", n)
        node = table[nid]
        if attr == "kind":
            if value not in ("discrete", "continuous"):
                raise ScenarioError(f"unknown kind {value!r}", n)
            node = replace(node, kind=value)
        elif cls == "p" and attr == "m":
            node = replace(node, m=_num(value, n, "m"))
        elif cls == "t" and attr == "v":
            try:
                node = replace(node, speed=parse_speed(value))
            except ValueError as exc:
                raise ScenarioError(str(exc), n) from None
        elif cls == "t" and attr == "d":
            node = replace(node, delay=_num(value, n, "d"))
        else:
            raise ScenarioError(f"unknown parameter {cls}{nid}.{attr}", n)
        net = net.with_place(node) if cls == "p" else net.with_transition(node)
    return net


def _read_events(lines: list[Line]) -> list:
    out = []
    for ln in lines:
        n, parts = ln.number, ln.text.split()
        if len(parts) < 3 or parts[0] != "at":
            raise ScenarioError(f"expected 'at <step> <action>', got {ln.text!r}", n)
        at, verb, args = _int(parts[1], n, "step"), parts[2], parts[3:]
        if at < 0:
            raise ScenarioError("event steps are nonnegative", n)
        if verb == "set":
            m = re.fullmatch(r"p(\d+)\.m=(\S+)", "".join(args))
            if not m:
                raise ScenarioError("expected 'set p<id>.m=<num>'", n)
            value = _num(m.group(2), n, "marking")
            if value < 0:
                raise ScenarioError("markings are nonnegative", n)
            out.append((n, at, verb, (int(m.group(1)), value)))
        elif verb in ("attach", "detach") and len(args) == 1:
            out.append((n, at, verb, (args[0],)))
        elif verb == "command" and len(args) == 2:
            value = _num(args[1], n, "command")
            if value < 0:
                raise ScenarioError("effector commands are nonnegative", n)
            out.append((n, at, verb, (args[0], value)))
        else:
            raise ScenarioError(f"cannot read event {ln.text!r}", n)
    return out


def loads(text: str) -> Scenario:
    """Read a scenario. Formula errors propagate with file byte offsets."""
    found, offset = _sections(text)
    if "net" not in found:
        raise ScenarioError("missing [net] section")
    formula = "".join(ln.text for ln in found["net"])
    try:
        net, warnings = parse_with_warnings(formula)
    except Exception as exc:
        diag = getattr(exc, "diagnostic", None)
        if diag is not None:
            diag.offset += offset
        raise
    net = _apply_params(net, found.get("params", []))
    problems = validate(net)
    if problems:
        raise NetError(problems)

    gadget_specs = []
    for ln in found.get("gadgets", []):
        kind, *rest = ln.text.split()
        if kind not in _BUILDERS:
            raise ScenarioError(f"unknown gadget kind {kind!r}", ln.number)
        gadget_specs.append((ln.number, kind, _options(rest, ln.number, _GADGET_KEYS)))
    solver_specs = [(ln.number, _options(ln.text.split(), ln.number, _SOLVER_KEYS))
                    for ln in found.get("solver", [])]

    run_opts = {}
    for ln in found.get("run", []):
        run_opts.update(_options(ln.text.split(), ln.number, {"steps", "dt", "trace"}))
    steps = _int(run_opts.get("steps", "0"), 0, "steps")
    dt = _num(run_opts.get("dt", "1"), 0, "dt")
    if steps < 0 or not dt > 0:
        raise ScenarioError("[run] needs steps >= 0 and dt > 0")
    scenario = Scenario(net, gadget_specs, solver_specs, steps, dt, run_opts.get("trace"),
                        _read_events(found.get("events", [])), warnings, offset)
    scenario.build()  # surface unknown names and attach errors up front
    return scenario


def load(path: str | Path) -> Scenario:
    return loads(Path(path).read_text(encoding="utf-8"))
