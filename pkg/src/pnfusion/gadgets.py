"""Receptor and effector gadgets.

A gadget is a small net fragment with open slots. Attaching it fuses the
slots with nodes of a host net (p-fusion for place targets, t-fusion for
transition targets); detaching defuses the gadget's own nodes again.

Receptors copy a quantity of the host into a display place:

* ``RM`` mirrors a place marking through an associative arc, so the host
  place is never drained;
* ``RV`` adds an output arc to a host transition, so the display fills at
  the transition's speed;
* ``ComplexRM`` sums several places into one display.

Effectors push a commanded quantity into the host:

* ``EM`` moves a budget of tokens into a place at a bounded rate;
* ``EV`` keeps a level place at the commanded value and that level is
  added to the speed of the host transition;
* ``ComplexEM`` splits one budget over several places at per-target rates.

Fragments use positive local ids for the gadget's own nodes and negative
ids for slots: slot ``-1 - i`` is fused with ``targets[i]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import (
    AlreadyAttached,
    EmptyTargetSet,
    GadgetError,
    InvalidParams,
    NegativeValue,
    NotAReceptor,
    NotAnEffector,
    NotAttached,
    UnknownTarget,
    WrongTargetClass,
)
from .fusion import compose, defuse
from .net import ASSOCIATIVE, NORMAL, Arc, Net, Place, Transition, renumber, validate
from .speed import BinOp, Const, Ref, SpeedExpr

RM, RV, EM, EV = "RM", "RV", "EM", "EV"
COMPLEX_RM, COMPLEX_EM = "ComplexRM", "ComplexEM"
RECEPTORS = (RM, RV, COMPLEX_RM)
EFFECTORS = (EM, EV, COMPLEX_EM)
PLACE_TARGETS = (RM, EM, COMPLEX_RM, COMPLEX_EM)

UNLIMITED = None


@dataclass(frozen=True)
class GadgetParams:
    """Gadget parameters.

    ``m_cmd``   perceived or transferred value (m')
    ``cap``     per-step capacity (v'); ``None`` is unlimited
    ``rate``    v'': reset switch for receptors (0 keeps a running sum),
                feed rate for effectors (``None`` is unlimited)
    ``tau``     response delay (τ') of the transfer transition
    ``thresh``  response threshold (k) of a marking receptor
    ``rates``   per-target transfer rates of a complex marking effector
    """

    m_cmd: float = 0.0
    cap: float | None = UNLIMITED
    rate: float | None = 1.0
    tau: float = 0.0
    thresh: float = 0.0
    rates: tuple = ()

    def check(self) -> "GadgetParams":
        for name in ("m_cmd", "cap", "rate", "tau", "thresh"):
            value = getattr(self, name)
            if value is None:
                continue
            if not isinstance(value, (int, float)) or math.isnan(value) or value < 0:
                raise InvalidParams(f"{name} must be a nonnegative number, got {value!r}")
        if not math.isfinite(self.m_cmd):
            raise InvalidParams("m_cmd must be finite")
        if any(not (isinstance(r, (int, float)) and r > 0 and math.isfinite(r)) for r in self.rates):
            raise InvalidParams("per-target rates must be positive and finite")
        return self


def unlimited_cap(m_cmd: float) -> float:
    """The "capacity matches m'" sentinel."""
    return m_cmd


@dataclass(eq=False)
class Gadget:
    kind: str
    targets: tuple
    params: GadgetParams
    fragment: Net
    roles: dict
    order: tuple
    name: str
    attached: bool = False
    ids: dict = field(default_factory=dict)
    driven_by: object = None  # solver feeding this effector, once wired

    @property
    def is_receptor(self) -> bool:
        return self.kind in RECEPTORS

    @property
    def is_effector(self) -> bool:
        return self.kind in EFFECTORS

    @property
    def display_place(self) -> int | None:
        return self.host("display") if "display" in self.roles and self.attached else None

    @property
    def command_place(self) -> int | None:
        role = "budget" if "budget" in self.roles else "level"
        return self.host(role) if role in self.roles and self.attached else None

    def host(self, role: str) -> int:
        """Host-net id of a gadget node, by role name."""
        if not self.attached:
            raise NotAttached(f"gadget {self.name} is not attached")
        return self.ids[self.roles[role]]

    @property
    def own_ids(self) -> set[int]:
        return {v for k, v in self.ids.items() if k > 0}


def _ref_min(x: SpeedExpr, cap: float | None) -> SpeedExpr:
    return x if cap is None else BinOp("min", x, Const(float(cap)))


def _pos(x: SpeedExpr) -> SpeedExpr:
    return BinOp("max", Const(0.0), x)


def _rate(rate: float | None) -> SpeedExpr:
    return Const(math.inf if rate is None else float(rate))


def _fragment(places, transitions, arcs) -> Net:
    return Net({p.id: p for p in places}, {t.id: t for t in transitions},
               {a.key: a for a in arcs})


def _slot_place(i: int) -> Place:
    return Place(-1 - i)


def _slot_trans(i: int) -> Transition:
    return Transition(-1 - i)


def _targets(x) -> tuple:
    targets = tuple(x) if isinstance(x, (list, tuple, set, frozenset)) else (x,)
    if not targets:
        raise EmptyTargetSet("a gadget needs at least one target")
    if len(set(targets)) != len(targets):
        raise InvalidParams("targets must be distinct")
    return targets


def _params(params: GadgetParams | None, defaults: dict, overrides: dict) -> GadgetParams:
    base = params if params is not None else GadgetParams(**defaults)
    return replace(base, **overrides).check()


def build_rm(i: int, params: GadgetParams | None = None, name: str | None = None, **kw) -> Gadget:
    """Position marking receptor on place ``i``.

    With unlimited capacity the display reads the target marking of the
    previous step (reset mode) or the running sum of all previous steps
    (``rate=0``). A finite capacity in reset mode fills the display by at
    most ``cap`` per step until it matches the target.
    """
    p = _params(params, {}, kw)
    slot = _slot_place(0)
    transfer, display, outlet = 1, 2, 3
    reset = p.rate is None or p.rate > 0
    arcs = [Arc(slot.id, transfer, ASSOCIATIVE, k=p.thresh), Arc(transfer, display), Arc(display, outlet)]
    if p.cap is not None and reset:
        transfer_speed = BinOp("min", Const(float(p.cap)), _pos(BinOp("-", Ref(slot.id), Ref(display))))
        outlet_speed: SpeedExpr = _pos(BinOp("-", Ref(display), Ref(slot.id)))
        arcs += [Arc(display, transfer, ASSOCIATIVE), Arc(slot.id, outlet, ASSOCIATIVE)]
    else:
        transfer_speed = _ref_min(Ref(slot.id), p.cap)
        outlet_speed = Ref(display) if reset else Const(0.0)
    frag = _fragment(
        [slot, Place(display, display=True)],
        [Transition(transfer, transfer_speed, delay=p.tau), Transition(outlet, outlet_speed)],
        arcs,
    )
    return Gadget(RM, (i,), p, frag, {"transfer": transfer, "display": display, "outlet": outlet},
                  (transfer, display, outlet), name or f"rm{i}")


def build_rv(j: int, params: GadgetParams | None = None, name: str | None = None, **kw) -> Gadget:
    """Transition velocity receptor on transition ``j``.

    The display receives ``v_j * dt`` per step through an extra output arc
    of ``j``; output arcs never restrict firing, so ``j`` is unaffected.
    """
    p = _params(params, {}, kw)
    slot = _slot_trans(0)
    display, outlet = 1, 2
    reset = p.rate is None or p.rate > 0
    frag = _fragment(
        [Place(display, display=True)],
        [slot, Transition(outlet, Ref(display) if reset else Const(0.0))],
        [Arc(slot.id, display), Arc(display, outlet)],
    )
    return Gadget(RV, (j,), p, frag, {"display": display, "outlet": outlet},
                  (display, outlet), name or f"rv{j}")


def build_complex_rm(targets, params: GadgetParams | None = None, name: str | None = None,
                     **kw) -> Gadget:
    """Receptor whose display reads the summed marking of several places.

    Each target gets its own associative transfer transition, capped at
    ``cap`` per step when a capacity is set.
    """
    targets = _targets(targets)
    p = _params(params, {}, kw)
    n = len(targets)
    display, outlet = n + 1, n + 2
    reset = p.rate is None or p.rate > 0
    places = [_slot_place(i) for i in range(n)] + [Place(display, display=True)]
    transitions = [Transition(1 + i, _ref_min(Ref(-1 - i), p.cap), delay=p.tau) for i in range(n)]
    transitions.append(Transition(outlet, Ref(display) if reset else Const(0.0)))
    arcs = []
    for i in range(n):
        arcs += [Arc(-1 - i, 1 + i, ASSOCIATIVE, k=p.thresh), Arc(1 + i, display)]
    arcs.append(Arc(display, outlet))
    roles = {"display": display, "outlet": outlet}
    roles.update({f"transfer{i}": 1 + i for i in range(n)})
    return Gadget(COMPLEX_RM, targets, p, _fragment(places, transitions, arcs), roles,
                  tuple(range(1, n + 3)), name or "crm" + "_".join(map(str, targets)))


def _marking_effector(kind, targets, p: GadgetParams, rates, name) -> Gadget:
    n = len(targets)
    source, budget, store = 1, 2, 3
    places = [_slot_place(i) for i in range(n)]
    places += [Place(budget, m=p.m_cmd), Place(store)]
    transitions = [Transition(source, _rate(p.rate))]
    arcs = [Arc(budget, source), Arc(source, store)]
    for i, r in enumerate(rates):
        x = 4 + i
        transitions.append(Transition(x, _rate(r), delay=p.tau))
        arcs += [Arc(store, x), Arc(x, -1 - i)]
    roles = {"source": source, "budget": budget, "store": store}
    roles.update({f"transfer{i}": 4 + i for i in range(n)})
    if n == 1:
        roles["transfer"] = 4
    return Gadget(kind, targets, p, _fragment(places, transitions, arcs), roles,
                  tuple(range(1, n + 4)), name)


def build_em(i: int, params: GadgetParams | None = None, name: str | None = None, **kw) -> Gadget:
    """Position marking effector delivering ``m_cmd`` tokens into place ``i``.

    The budget place starts at ``m_cmd`` and is fed at ``rate`` per step
    into the effector place, which passes at most ``cap`` per step on to
    the target.
    """
    p = _params(params, {"rate": None}, kw)
    return _marking_effector(EM, (i,), p, (p.cap,), name or f"em{i}")


def build_complex_em(targets, rates, params: GadgetParams | None = None, name: str | None = None,
                     **kw) -> Gadget:
    """Marking effector sharing one budget over several places.

    ``rates[k]`` is the per-step transfer rate towards ``targets[k]``;
    when the shared place runs low it is split in proportion to the rates.
    """
    targets = _targets(targets)
    rates = tuple(float(r) for r in rates)
    if len(rates) != len(targets):
        raise InvalidParams("one rate per target is required")
    p = _params(params, {"rate": None}, {**kw, "rates": rates})
    return _marking_effector(COMPLEX_EM, targets, p, rates, name or "cem" + "_".join(map(str, targets)))


def _ev_source_speed(p: GadgetParams, level: int) -> SpeedExpr:
    deficit = _pos(BinOp("-", Const(float(p.m_cmd)), Ref(level)))
    return deficit if p.rate is None else BinOp("min", Const(float(p.rate)), deficit)


def build_ev(j: int, params: GadgetParams | None = None, name: str | None = None, **kw) -> Gadget:
    """Transition velocity effector on transition ``j``.

    A source keeps the level place at ``m_cmd``; the level is read by an
    associative arc and added to the speed of ``j``.
    """
    p = _params(params, {"rate": None}, kw)
    slot = _slot_trans(0)
    source, level = 1, 2
    frag = _fragment(
        [Place(level, boost=True)],
        [slot, Transition(source, _ev_source_speed(p, level))],
        [Arc(source, level), Arc(level, source, ASSOCIATIVE), Arc(level, slot.id, ASSOCIATIVE)],
    )
    return Gadget(EV, (j,), p, frag, {"source": source, "level": level},
                  (source, level), name or f"ev{j}")


# ---------------------------------------------------------------- attach


def free_ids(net: Net, count: int, taken: set[int] = frozenset()) -> list[int]:
    """The ``count`` lowest positive ids unused by ``net`` and ``taken``."""
    used = net.ids | set(taken)
    out, n = [], 1
    while len(out) < count:
        if n not in used:
            out.append(n)
        n += 1
    return out


def _check_targets(net: Net, gadget: Gadget) -> None:
    for t in gadget.targets:
        if t not in net.ids:
            raise UnknownTarget(f"target {t} is not in the net")
        want_place = gadget.kind in PLACE_TARGETS
        if want_place and t not in net.places:
            raise WrongTargetClass(f"{gadget.kind} must target a place, {t} is a transition")
        if not want_place and t not in net.transitions:
            raise WrongTargetClass(f"{gadget.kind} must target a transition, {t} is a place")


def _slot_map(gadget: Gadget) -> dict[int, int]:
    return {-1 - i: t for i, t in enumerate(gadget.targets)}


def _drop(net: Net, local: int) -> Net:
    return Net({k: v for k, v in net.places.items() if k != local},
               {k: v for k, v in net.transitions.items() if k != local},
               {k: a for k, a in net.arcs.items() if local not in (a.source, a.target)})


def _fuse_into(net: Net, parts: list[Net], targets) -> Net:
    hosts = [net.node(t) for t in targets]
    out = compose(net, *[_drop_slots(p, targets) for p in parts], override=hosts)
    problems = validate(out)
    if problems:
        raise GadgetError("attach produced an invalid net: " + "; ".join(map(str, problems)))
    return out


def _drop_slots(frag: Net, targets) -> Net:
    # slot records are placeholders; the host records stand in for them
    keep = lambda i: i not in targets  # noqa: E731
    return Net({k: v for k, v in frag.places.items() if keep(k)},
               {k: v for k, v in frag.transitions.items() if keep(k)}, dict(frag.arcs))


def attach(net: Net, gadget: Gadget) -> Net:
    """Fuse ``gadget`` into ``net``; its own nodes take the lowest free ids."""
    if gadget.attached:
        raise AlreadyAttached(f"gadget {gadget.name} is already attached")
    _check_targets(net, gadget)
    mapping = dict(zip(gadget.order, free_ids(net, len(gadget.order))))
    mapping.update(_slot_map(gadget))
    frag = renumber(gadget.fragment, mapping)
    out = _fuse_into(net, [frag], gadget.targets)
    gadget.ids = mapping
    gadget.attached = True
    return out


def detach(net: Net, gadget) -> Net:
    """Defuse the gadget's own nodes; host nodes and their arcs are untouched.

    Works for gadgets and for wired solvers. Tokens inside the gadget are
    dropped.
    """
    if not gadget.attached:
        raise NotAttached(f"{gadget.name} is not attached")
    own = gadget.own_ids
    missing = own - net.ids
    if missing:
        raise NotAttached(f"{gadget.name} nodes {sorted(missing)} are not in this net")
    _, residue = defuse(net, own)
    places = {pid: p for pid, p in net.places.items() if pid not in own}
    transitions = {tid: t for tid, t in net.transitions.items() if tid not in own}
    out = Net(places, transitions, dict(residue.arcs))
    gadget.attached = False
    gadget.ids = {}
    if getattr(gadget, "driven_by", None) is not None:
        gadget.driven_by = None
    return out


def read(state, gadget: Gadget) -> float:
    """Current marking of a receptor's display place."""
    if not gadget.is_receptor:
        raise NotAReceptor(f"{gadget.name} is not a receptor")
    if not gadget.attached:
        raise NotAttached(f"{gadget.name} is not attached")
    return state.marking[gadget.host("display")]


# ---------------------------------------------------------------- requests


@dataclass(frozen=True)
class Command:
    """Effector command: EM budgets grow by ``value``, EV levels are set to it."""

    gadget: Gadget
    value: float

    def apply(self, state) -> None:
        g = self.gadget
        if not g.is_effector:
            raise NotAnEffector(f"{g.name} is not an effector")
        if self.value < 0:
            raise NegativeValue("effector commands are nonnegative")
        if not g.attached:
            raise NotAttached(f"{g.name} is not attached")
        if g.kind == EV:
            if g.driven_by is not None:
                raise GadgetError(f"{g.name} is driven by solver {g.driven_by.name}")
            g.params = replace(g.params, m_cmd=float(self.value))
            sid = g.host("source")
            level = g.host("level")
            trans = state.net.transitions[sid]
            state.set_net(state.net.with_transition(replace(trans, speed=_ev_source_speed(g.params, level))))
        else:
            g.params = replace(g.params, m_cmd=g.params.m_cmd + float(self.value))
            state.marking[g.host("budget")] += float(self.value)


@dataclass(frozen=True)
class Attach:
    gadget: Gadget

    def apply(self, state) -> None:
        state.set_net(attach(state.net, self.gadget))


@dataclass(frozen=True)
class Detach:
    gadget: object

    def apply(self, state) -> None:
        state.set_net(detach(state.net, self.gadget))


def command(state, gadget: Gadget, value: float) -> None:
    """Queue an effector command for the next step boundary."""
    if not gadget.is_effector:
        raise NotAnEffector(f"{gadget.name} is not an effector")
    if value < 0:
        raise NegativeValue("effector commands are nonnegative")
    state.request(Command(gadget, value))
