"""Setpoint solver: a net fragment between a receptor and an effector.

The solver is one command transition ``c`` whose speed is the scaled
deficit ``g * max(0, T - m(display))``. Its output feeds the effector:
the budget place of a marking effector, or the level place of a velocity
effector (which then replaces the effector's own level source, so the
level integrates the commands).

With a constant setpoint the display reaches ``c`` through an inhibitory
arc of threshold ``T``, giving an exact deadband. A ``reference`` receptor
makes the setpoint track a second reading: ``T + ref_gain * reading``.

:class:`SetpointPolicy` is the same controller written as a policy hook.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import AlreadyAttached, InvalidParams, NotAReceptor, NotAnEffector
from .gadgets import (
    COMPLEX_EM,
    EM,
    EV,
    Gadget,
    _check_targets,
    _drop,
    _fuse_into,
    _slot_map,
    attach,
    free_ids,
)
from .net import ASSOCIATIVE, INHIBITORY, Arc, Net, Transition, renumber
from .speed import BinOp, Const, Ref, SpeedExpr


@dataclass(eq=False)
class SetpointSolver:
    setpoint: float
    gain: float
    receptor: Gadget
    effector: Gadget
    reference: Gadget | None = None
    ref_gain: float = 0.0
    limit: float | None = None  # velocity loops: no commands once the level reaches it
    name: str = "solver"
    attached: bool = False
    ids: dict = field(default_factory=dict)

    @property
    def is_receptor(self) -> bool:
        return False

    @property
    def own_ids(self) -> set[int]:
        return set(self.ids.values())

    @property
    def command_transition(self) -> int:
        return self.ids["command"]

    def speed(self, display: int, ref_display: int | None = None) -> SpeedExpr:
        target: SpeedExpr = Const(float(self.setpoint))
        if ref_display is not None:
            target = BinOp("+", target, BinOp("*", Const(float(self.ref_gain)), Ref(ref_display)))
        deficit = BinOp("max", Const(0.0), BinOp("-", target, Ref(display)))
        return BinOp("*", Const(float(self.gain)), deficit)


def build_setpoint_solver(T: float, g: float, receptor: Gadget, effector: Gadget,
                          reference: Gadget | None = None, ref_gain: float = 0.0,
                          limit: float | None = None, name: str | None = None) -> SetpointSolver:
    """Check parameters and roles; the fragment is built by :func:`wire`.

    ``g = 0`` is accepted and gives a solver that never commands.
    """
    for label, value in (("setpoint", T), ("gain", g), ("ref_gain", ref_gain)):
        if not isinstance(value, (int, float)) or not value >= 0 or value == float("inf"):
            raise InvalidParams(f"{label} must be a finite nonnegative number, got {value!r}")
    if not receptor.is_receptor or "display" not in receptor.roles:
        raise NotAReceptor(f"{receptor.name} is not a receptor")
    if reference is not None and not reference.is_receptor:
        raise NotAReceptor(f"{reference.name} is not a receptor")
    if effector.kind not in (EM, EV, COMPLEX_EM):
        raise NotAnEffector(f"{effector.name} is not an effector")
    if limit is not None and (effector.kind != EV or not limit >= 0):
        raise InvalidParams("limit applies to velocity effectors and must be nonnegative")
    return SetpointSolver(float(T), float(g), receptor, effector, reference, float(ref_gain),
                          None if limit is None else float(limit), name or f"solver_{receptor.name}_{effector.name}")


def wire(net: Net, receptor: Gadget, solver: SetpointSolver, effector: Gadget) -> Net:
    """Attach receptor, solver and effector and connect them.

    The receptor (and reference receptor) may already be attached. The
    effector must not be: the solver takes over its command input. New
    ids follow the order effector source and budget, solver, rest of the
    effector, then an unattached reference receptor.
    """
    if solver.receptor is not receptor or solver.effector is not effector:
        raise InvalidParams("solver was built for a different receptor/effector pair")
    if solver.attached:
        raise AlreadyAttached(f"{solver.name} is already attached")
    if effector.attached:
        raise AlreadyAttached(f"{effector.name} is already attached")
    if not receptor.attached:
        net = attach(net, receptor)
    _check_targets(net, effector)
    ref = solver.reference
    ref_late = ref is not None and not ref.attached
    if ref_late:
        _check_targets(net, ref)

    frag = effector.fragment
    roles = effector.roles
    if effector.kind == EV:
        frag = _drop(frag, roles["source"])
        order = [("solver", 0), ("eff", roles["level"])]
    else:
        lead = [roles["source"], roles["budget"]]
        order = [("eff", i) for i in lead] + [("solver", 0)]
        order += [("eff", i) for i in effector.order if i not in lead]
    if ref_late:
        order += [("ref", i) for i in ref.order]

    fresh = free_ids(net, len(order))
    eff_map, ref_map, cmd = _slot_map(effector), {}, None
    for (who, local), new in zip(order, fresh):
        if who == "eff":
            eff_map[local] = new
        elif who == "ref":
            ref_map[local] = new
        else:
            cmd = new
    parts = [renumber(frag, eff_map)]
    targets = list(effector.targets)
    if ref_late:
        ref_map.update(_slot_map(ref))
        parts.append(renumber(ref.fragment, ref_map))
        targets += [t for t in ref.targets if t not in targets]

    display = receptor.host("display")
    ref_display = None
    if ref is not None:
        ref_display = ref_map[ref.roles["display"]] if ref_late else ref.host("display")
    sink = eff_map[roles["level"] if effector.kind == EV else roles["budget"]]
    arcs = [Arc(cmd, sink)]
    if ref_display is None:
        arcs.append(Arc(display, cmd, INHIBITORY, k=solver.setpoint))
    else:
        arcs += [Arc(display, cmd, ASSOCIATIVE), Arc(ref_display, cmd, ASSOCIATIVE)]
    if solver.limit is not None:
        arcs.append(Arc(sink, cmd, INHIBITORY, k=solver.limit))
    parts.append(Net({}, {cmd: Transition(cmd, solver.speed(display, ref_display))},
                     {a.key: a for a in arcs}))
    hosts = set(targets) | {display} | ({ref_display} if ref_display and not ref_late else set())
    out = _fuse_into(net, parts, sorted(hosts))

    effector.ids, effector.attached, effector.driven_by = eff_map, True, solver
    if ref_late:
        ref.ids, ref.attached = ref_map, True
    solver.ids, solver.attached = {"command": cmd}, True
    return out


class SetpointPolicy:
    """The setpoint solver as a policy hook.

    Marking effectors: the command computed at one boundary is issued at the
    next, mirroring the step the PN solver needs to fill the budget place.
    Velocity effectors: commands accumulate into the maintained level, as
    the PN solver's output place does. Assumes ``dt = 1`` for the level
    refill, like the velocity effector itself.
    """

    def __init__(self, setpoint: float, gain: float, receptor: str, effector: Gadget,
                 reference: str | None = None, ref_gain: float = 0.0,
                 limit: float | None = None, dt: float = 1.0):
        self.setpoint = setpoint
        self.gain = gain
        self.receptor = receptor
        self.effector = effector.name
        self.integrate = effector.kind == EV
        self.reference = reference
        self.ref_gain = ref_gain
        self.limit = limit
        self.dt = dt
        self.level = 0.0
        self._held: float | None = None

    def __call__(self, readings):
        target = self.setpoint
        if self.reference is not None:
            target += self.ref_gain * readings[self.reference]
        value = self.gain * max(0.0, target - readings[self.receptor]) * self.dt
        if self.integrate:
            if self.limit is None or self.level < self.limit:
                self.level += value
            return {self.effector: self.level}
        out = {} if self._held is None else {self.effector: self._held}
        self._held = value
        return out
