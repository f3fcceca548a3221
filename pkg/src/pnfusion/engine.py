"""Fixed-step synchronous simulation of hybrid functional nets.

Each step has two phases. READ evaluates enabling and effective speeds of
every continuous transition from the marking at the start of the step.
WRITE applies all continuous flows at once, then fires ready discrete
transitions one by one in ascending id order.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

from .errors import NegativeMarkingBug, NonFiniteSpeed, UnderTransformation
from .net import (
    ASSOCIATIVE,
    CONTINUOUS,
    DISCRETE,
    INHIBITORY,
    NORMAL,
    Net,
    Transition,
)

CLAMP_EPS = 1e-9
NEGATIVE_LIMIT = -1e-6
_TIME_EPS = 1e-12


@dataclass
class SimState:
    """Mutable run state owned by one caller at a time."""

    net: Net
    marking: dict[int, float]
    time: float = 0.0
    step: int = 0
    pending: list = field(default_factory=list)
    age: dict[int, float] = field(default_factory=dict)

    @classmethod
    def initial(cls, net: Net) -> "SimState":
        return cls(net, {pid: float(p.m) for pid, p in sorted(net.places.items())})

    @property
    def under_transformation(self) -> bool:
        return self.net.under_transformation

    def request(self, req) -> None:
        """Queue a request; it is applied at the next step boundary."""
        self.pending.append(req)

    def copy(self) -> "SimState":
        return SimState(self.net, dict(self.marking), self.time, self.step,
                        list(self.pending), dict(self.age))

    def set_net(self, net: Net) -> None:
        """Swap in a structurally changed net, keeping markings of surviving places."""
        self.marking = {pid: self.marking.get(pid, float(p.m)) for pid, p in sorted(net.places.items())}
        self.age = {tid: a for tid, a in self.age.items() if tid in net.transitions}
        self.net = net


@dataclass(frozen=True)
class SetMarking:
    place: int
    value: float

    def apply(self, state: SimState) -> None:
        if self.place not in state.marking:
            raise KeyError(f"no place {self.place}")
        if self.value < 0:
            raise ValueError("markings are nonnegative")
        state.marking[self.place] = float(self.value)


def _tid(t) -> int:
    return t.id if isinstance(t, Transition) else t


def enabled(t, marking: Mapping[int, float], net: Net) -> bool:
    """Threshold test over input arcs; inhibitory arcs need ``M < k``."""
    trans = net.transitions[_tid(t)]
    for arc in net.inputs(trans.id):
        m = marking[arc.source]
        if arc.kind == INHIBITORY:
            if not m < arc.k:
                return False
        else:
            if m < arc.k:
                return False
            if trans.kind == DISCRETE and m < arc.w:
                return False
    return True


def base_speed(t, marking: Mapping[int, float], net: Net) -> float:
    """Speed expression plus contributions of velocity-effector levels."""
    trans = net.transitions[_tid(t)]
    v = trans.speed.evaluate(marking)
    explicit = trans.speed.refs()
    for arc in net.inputs(trans.id):
        # a level the speed already reads by name is not added on top
        if arc.kind == ASSOCIATIVE and net.places[arc.source].boost and arc.source not in explicit:
            v += marking[arc.source]
    return v


def effective_speed(t, marking: Mapping[int, float], net: Net, dt: float = 1.0) -> float:
    """Enabled, evaluated and flow-limited speed of one continuous transition.

    Does not include the proportional sharing between transitions that
    drain the same place; :func:`read_phase` applies that on top.
    """
    trans = net.transitions[_tid(t)]
    if trans.kind != CONTINUOUS or not enabled(trans, marking, net):
        return 0.0
    v = base_speed(trans, marking, net)
    if math.isnan(v):
        raise NonFiniteSpeed(f"speed of transition {trans.id} is NaN")
    for arc in net.inputs(trans.id):
        if arc.kind == NORMAL:
            v = min(v, marking[arc.source] / (arc.w * dt))
    if math.isinf(v):
        raise NonFiniteSpeed(f"speed of transition {trans.id} is unbounded")
    return max(v, 0.0)


def read_phase(net: Net, marking: Mapping[int, float], dt: float,
               age: Mapping[int, float] | None = None) -> dict[int, float]:
    """Speeds every continuous transition will run at for one step from ``marking``."""
    age = age or {}
    speeds: dict[int, float] = {}
    for tid in sorted(net.transitions):
        trans = net.transitions[tid]
        if trans.kind != CONTINUOUS:
            continue
        if trans.delay > 0 and age.get(tid, 0.0) + _TIME_EPS < trans.delay:
            speeds[tid] = 0.0
            continue
        speeds[tid] = effective_speed(trans, marking, net, dt)
    # places drained by several transitions are shared in proportion
    demand: dict[int, float] = {}
    for arc in net.arcs.values():
        if arc.kind == NORMAL and arc.target in speeds and speeds[arc.target] > 0:
            demand[arc.source] = demand.get(arc.source, 0.0) + arc.w * speeds[arc.target] * dt
    factor = {pid: marking[pid] / d for pid, d in demand.items() if d > marking[pid]}
    if factor:
        for tid in speeds:
            f = min((factor.get(a.source, 1.0) for a in net.inputs(tid) if a.kind == NORMAL),
                    default=1.0)
            if f < 1.0:
                speeds[tid] *= f
    return speeds


def _check(marking: dict[int, float]) -> None:
    for pid, m in marking.items():
        if m < 0:
            if m < NEGATIVE_LIMIT:
                raise NegativeMarkingBug(f"place {pid} fell to {m}")
            marking[pid] = 0.0


def step(state: SimState, dt: float = 1.0, speeds: Mapping[int, float] | None = None) -> SimState:
    """Advance one step and return the new state; ``state`` is not modified."""
    if state.net.under_transformation:
        raise UnderTransformation("net is being transformed; recompose before stepping")
    if not dt > 0:
        raise ValueError("dt must be positive")
    net = state.net
    M = state.marking
    if speeds is None:
        speeds = read_phase(net, M, dt, state.age)
    was_enabled = {tid: enabled(tid, M, net) for tid in sorted(net.transitions)}

    new = dict(M)
    for arc in net.sorted_arcs():
        if arc.kind != NORMAL:
            continue
        if arc.target in speeds:
            new[arc.source] -= arc.w * speeds[arc.target] * dt
        elif arc.source in speeds:
            new[arc.target] += arc.w * speeds[arc.source] * dt

    fired = set()
    for tid in sorted(net.transitions):
        trans = net.transitions[tid]
        if trans.kind != DISCRETE:
            continue
        if state.age.get(tid, 0.0) + _TIME_EPS < trans.delay:
            continue
        if not enabled(trans, new, net):
            continue
        for arc in net.inputs(tid):
            if arc.kind == NORMAL:
                new[arc.source] -= arc.w
        for arc in net.outputs(tid):
            new[arc.target] += arc.w
        fired.add(tid)
    _check(new)

    age = {}
    for tid, on in was_enabled.items():
        if on and tid not in fired:
            age[tid] = state.age.get(tid, 0.0) + dt
    out = SimState(net, new, state.time + dt, state.step + 1, [], age)
    for req in state.pending:
        req.apply(out)
    return out


# ---------------------------------------------------------------- traces


def _fmt(x: float) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return format(x, ".9g")


@dataclass
class Trace:
    """Recorded time series: one row per step boundary, initial row first."""

    places: tuple[int, ...]
    transitions: tuple[int, ...]
    rows: list[tuple] = field(default_factory=list)

    @property
    def columns(self) -> list[str]:
        return (["step", "time"] + [f"p{p}" for p in self.places]
                + [f"t{t}_v" for t in self.transitions])

    def record(self, state: SimState, speeds: Mapping[int, float]) -> None:
        row = [state.step, state.time]
        row += [state.marking.get(p, math.nan) for p in self.places]
        row += [speeds.get(t, math.nan) for t in self.transitions]
        self.rows.append(tuple(row))

    def column(self, name: str) -> list[float]:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def marking(self, place: int) -> list[float]:
        return self.column(f"p{place}")

    def speed(self, transition: int) -> list[float]:
        return self.column(f"t{transition}_v")

    def to_csv(self, columns: Sequence[str] | None = None) -> str:
        names = self.columns
        keep = list(range(len(names))) if columns is None else (
            [0, 1] + [names.index(c) for c in columns if c not in ("step", "time")])
        buf = io.StringIO()
        buf.write(",".join(names[i] for i in keep) + "\n")
        for row in self.rows:
            cells = [str(row[0])] + [_fmt(row[i]) for i in keep[1:]]
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()


# ---------------------------------------------------------------- runs


@dataclass(frozen=True)
class Event:
    """A request scheduled for the boundary before step ``step`` runs."""

    step: int
    action: object


Policy = Callable[[Mapping[str, float]], Mapping[str, float]]


@dataclass
class RunConfig:
    steps: int = 0
    dt: float = 1.0
    gadgets: list = field(default_factory=list)
    solvers: list = field(default_factory=list)
    policies: list = field(default_factory=list)
    events: list = field(default_factory=list)


def register_policy(config: RunConfig, hook: Policy) -> None:
    """Call ``hook`` at every step boundary with receptor readings.

    The hook gets ``{receptor name: reading}`` and returns
    ``{effector name: command}``; commands apply before the next step.
    """
    config.policies.append(hook)


def run(net: Net, steps: int, dt: float = 1.0, gadgets: Iterable = (), solvers: Iterable = (),
        policies: Iterable[Policy] = (), events: Iterable[Event] = ()) -> Trace:
    """Run ``steps`` steps and return the trace (initial row plus one per step).

    Unattached gadgets are attached before the first row unless an event
    attaches them later. Events, then policies, act at each boundary.
    """
    from . import gadgets as g  # local import: gadgets builds on this module

    if steps < 0:
        raise ValueError("steps must be nonnegative")
    gadgets = list(gadgets)
    events = sorted(events, key=lambda e: e.step)
    late = {id(e.action.gadget) for e in events if isinstance(e.action, g.Attach)}
    for gadget in gadgets:
        if not gadget.attached and id(gadget) not in late:
            net = g.attach(net, gadget)
    state = SimState.initial(net)
    by_name = {x.name: x for x in list(gadgets) + list(solvers)}
    trace = Trace(tuple(sorted(net.places)),
                  tuple(t for t in sorted(net.transitions)
                        if net.transitions[t].kind == CONTINUOUS))
    policies = list(policies)
    queue = list(events)

    def boundary():
        while queue and queue[0].step <= state.step:
            queue.pop(0).action.apply(state)
        for hook in policies:
            readings = {x.name: g.read(state, x) for x in gadgets
                        if x.is_receptor and x.attached}
            for name, value in (hook(readings) or {}).items():
                g.Command(by_name[name], value).apply(state)
        return read_phase(state.net, state.marking, dt, state.age)

    speeds = boundary()
    trace.record(state, speeds)
    for _ in range(steps):
        state = step(state, dt, speeds)
        speeds = boundary()
        trace.record(state, speeds)
    return trace


def run_config(net: Net, config: RunConfig) -> Trace:
    return run(net, config.steps, config.dt, config.gadgets, config.solvers,
               config.policies, config.events)
