"""Structural units and the fusion/defusion operators.

Every arc of a net, together with its two endpoint nodes, is one
:class:`StructuralUnit`. Defusion splits a net into units; p-, t- and
whole-fusion and :func:`compose` glue units back together.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Union

from .errors import (
    IndexClassClash,
    ParamConflict,
    ParseDiagnostic,
    UnknownScopeId,
    WrongEndpointClass,
)
from .formula import KIND_LETTER
from .net import ASSOCIATIVE, INHIBITORY, NORMAL, Arc, Net, Place, Transition

Node = Union[Place, Transition]


@dataclass(frozen=True)
class StructuralUnit:
    """One arc with both endpoint records.

    ``kind`` is ``C``/``A``/``B`` (place to transition) or ``I``
    (transition to place).
    """

    kind: str
    pre: Node
    post: Node
    k: float = 0.0
    w: int = 1

    def __post_init__(self):
        want = (Transition, Place) if self.kind == "I" else (Place, Transition)
        if self.kind not in "CIAB" or len(self.kind) != 1:
            raise ValueError(f"unknown unit kind {self.kind!r}")
        if not (isinstance(self.pre, want[0]) and isinstance(self.post, want[1])):
            raise WrongEndpointClass(f"{self.kind}-unit needs {want[0].__name__}->{want[1].__name__}")

    @property
    def place(self) -> Place:
        return self.post if self.kind == "I" else self.pre

    @property
    def transition(self) -> Transition:
        return self.pre if self.kind == "I" else self.post

    @property
    def arc(self) -> Arc:
        kind = {"C": NORMAL, "I": NORMAL, "A": ASSOCIATIVE, "B": INHIBITORY}[self.kind]
        return Arc(self.pre.id, self.post.id, kind, self.k, self.w)

    def __str__(self) -> str:
        return f"{self.pre.id}{self.kind}{self.post.id}"


def unit(kind: str, pre: int | Node, post: int | Node, k: float = 0.0, w: int = 1) -> StructuralUnit:
    """Shorthand: ``unit("C", 1, 2)`` is p1 -> t2 with default parameters."""
    if isinstance(pre, int):
        pre = Transition(pre) if kind == "I" else Place(pre)
    if isinstance(post, int):
        post = Place(post) if kind == "I" else Transition(post)
    return StructuralUnit(kind, pre, post, k, w)


def _unit_of(net: Net, arc: Arc) -> StructuralUnit:
    kind = "I" if arc.source in net.transitions else KIND_LETTER[arc.kind]
    return StructuralUnit(kind, net.node(arc.source), net.node(arc.target), arc.k, arc.w)


def defuse(net: Net, scope: Iterable[int] | None = None) -> tuple[list[StructuralUnit], Net]:
    """Split off the units of every arc touching ``scope`` (all arcs if None).

    Returns ``(units, residue)``. The residue keeps the untouched arcs and
    every node still needed by them; nodes that had no arcs at all stay in
    the residue too. A non-empty residue left beside defused units is
    flagged ``under_transformation``.
    """
    if scope is None:
        chosen = list(net.arcs.values())
    else:
        scope = set(scope)
        unknown = scope - net.ids
        if unknown:
            raise UnknownScopeId(f"scope ids {sorted(unknown)} are not in the net")
        chosen = [a for a in net.arcs.values() if a.source in scope or a.target in scope]
    chosen_keys = {a.key for a in chosen}
    units = [_unit_of(net, a) for a in sorted(chosen, key=lambda a: (a.source, a.target, a.kind))]
    rest = {key: a for key, a in net.arcs.items() if key not in chosen_keys}
    linked = {a.source for a in net.arcs.values()} | {a.target for a in net.arcs.values()}
    keep = {a.source for a in rest.values()} | {a.target for a in rest.values()} | (net.ids - linked)
    residue = Net(
        {pid: p for pid, p in net.places.items() if pid in keep},
        {tid: t for tid, t in net.transitions.items() if tid in keep},
        rest,
    )
    if units and not residue.is_empty():
        residue = replace(residue, under_transformation=True)
    return units, residue


def _merge_node(nodes: dict, node: Node, override: dict):
    if node.id in override:
        nodes[node.id] = override[node.id]
        return
    old = nodes.get(node.id)
    if old is None:
        nodes[node.id] = node
    elif type(old) is not type(node):
        raise IndexClassClash(ParseDiagnostic(0, f"id {node.id} used as both place and transition"))
    elif old != node:
        raise ParamConflict(f"node {node.id} has conflicting parameters: {old} vs {node}")


def compose(*fragments, override: Iterable[Node] = ()) -> Net:
    """Union of nets and units; equal ids fuse, coinciding arcs add weights.

    Each fragment may be a :class:`Net`, a :class:`StructuralUnit` or an
    iterable of either. Node records in ``override`` win over any
    conflicting record of the same id.
    """
    forced = {n.id: n for n in override}
    nodes: dict[int, Node] = {}
    arcs: dict[tuple, Arc] = {}

    def add_arc(arc: Arc):
        old = arcs.get(arc.key)
        if old is None:
            arcs[arc.key] = arc
        elif old.k != arc.k:
            raise ParamConflict(f"arc {arc.key} has thresholds {old.k} and {arc.k}")
        else:
            arcs[arc.key] = replace(old, w=old.w + arc.w)

    def visit(item):
        if isinstance(item, Net):
            for node in list(item.places.values()) + list(item.transitions.values()):
                _merge_node(nodes, node, forced)
            for arc in item.arcs.values():
                add_arc(arc)
        elif isinstance(item, StructuralUnit):
            _merge_node(nodes, item.pre, forced)
            _merge_node(nodes, item.post, forced)
            add_arc(item.arc)
        else:
            for sub in item:
                visit(sub)

    visit(fragments)
    places = {i: n for i, n in sorted(nodes.items()) if isinstance(n, Place)}
    transitions = {i: n for i, n in sorted(nodes.items()) if isinstance(n, Transition)}
    return Net(places, transitions, arcs)


def _fuse(units, target: int, which: str, override: Node | None) -> Net:
    units = list(units)
    cls = Place if which == "place" else Transition
    if override is not None and (override.id != target or not isinstance(override, cls)):
        raise WrongEndpointClass(f"override must be a {cls.__name__} with id {target}")
    others = [getattr(u, "transition" if which == "place" else "place") for u in units]
    if any(o.id == target for o in others):
        raise WrongEndpointClass(f"id {target} is a {'transition' if which == 'place' else 'place'} here")
    merged: dict[int, Node] = {}
    for u in units:
        node = getattr(u, which)
        fused = replace(node, id=target)
        if override is None:
            old = merged.setdefault(target, fused)
            if old != fused:
                raise ParamConflict(f"fused {which}s disagree: {old} vs {fused}")
    final = override or merged.get(target)
    renamed = []
    for u in units:
        node = getattr(u, which)
        if u.pre is node:
            renamed.append(replace(u, pre=final))
        else:
            renamed.append(replace(u, post=final))
    net = compose(renamed)
    if which == "place":
        # speeds that read a fused place now read the target
        moved = {getattr(u, which).id: target for u in units}
        net = replace(net, transitions={
            tid: replace(t, speed=t.speed.remap(moved)) for tid, t in net.transitions.items()})
    return net


def p_fuse(units: Iterable[StructuralUnit], target: int, override: Place | None = None) -> Net:
    """Fuse the place endpoint of every unit into the single place ``target``."""
    return _fuse(units, target, "place", override)


def t_fuse(units: Iterable[StructuralUnit], target: int, override: Transition | None = None) -> Net:
    """Fuse the transition endpoint of every unit into transition ``target``."""
    return _fuse(units, target, "transition", override)


def w_fuse(u: StructuralUnit, n: int) -> StructuralUnit:
    """n-fold self-fusion: same endpoints, arc multiplicity times ``n``."""
    if not (isinstance(n, int) and n >= 1):
        raise ValueError("whole-fusion order must be a positive integer")
    return replace(u, w=u.w * n)
