"""Hybrid functional Petri net data model.

Places and transitions share one id space. Parallel arcs of the same kind
are folded into a single :class:`Arc` with weight ``w``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import networkx as nx
from networkx.algorithms.isomorphism import DiGraphMatcher

from .errors import Diagnostic, NetError
from .speed import Const, SpeedExpr, as_speed

CONTINUOUS = "continuous"
DISCRETE = "discrete"

NORMAL = "normal"
INHIBITORY = "inhibitory"
ASSOCIATIVE = "associative"
ARC_KINDS = (NORMAL, INHIBITORY, ASSOCIATIVE)

Marking = dict


@dataclass(frozen=True)
class Place:
    id: int
    m: float = 0.0
    kind: str = CONTINUOUS
    display: bool = False  # receptor read-out position
    boost: bool = False  # velocity-effector level, added to downstream speeds
    label: str | None = None


@dataclass(frozen=True)
class Transition:
    id: int
    speed: SpeedExpr = Const(1.0)
    kind: str = CONTINUOUS
    delay: float = 0.0
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "speed", as_speed(self.speed))


@dataclass(frozen=True)
class Arc:
    source: int
    target: int
    kind: str = NORMAL
    k: float = 0.0
    w: int = 1

    @property
    def key(self) -> tuple[int, int, str]:
        return (self.source, self.target, self.kind)


@dataclass(frozen=True)
class Net:
    """An immutable net value. Build through :func:`build_net` to validate."""

    places: Mapping[int, Place] = field(default_factory=dict)
    transitions: Mapping[int, Transition] = field(default_factory=dict)
    arcs: Mapping[tuple, Arc] = field(default_factory=dict)
    under_transformation: bool = False

    def __len__(self) -> int:
        return len(self.places) + len(self.transitions)

    @property
    def ids(self) -> set[int]:
        return set(self.places) | set(self.transitions)

    def is_empty(self) -> bool:
        return not (self.places or self.transitions or self.arcs)

    def node(self, node_id: int):
        if node_id in self.places:
            return self.places[node_id]
        return self.transitions[node_id]

    def inputs(self, t: int) -> list[Arc]:
        return sorted((a for a in self.arcs.values() if a.target == t), key=_arc_order)

    def outputs(self, t: int) -> list[Arc]:
        return sorted((a for a in self.arcs.values() if a.source == t), key=_arc_order)

    def sorted_arcs(self) -> list[Arc]:
        return sorted(self.arcs.values(), key=_arc_order)

    def with_place(self, place: Place) -> "Net":
        return replace(self, places={**self.places, place.id: place})

    def with_transition(self, transition: Transition) -> "Net":
        return replace(self, transitions={**self.transitions, transition.id: transition})

    def with_arc(self, arc: Arc) -> "Net":
        return replace(self, arcs={**self.arcs, arc.key: arc})

    def without_arc(self, key: tuple) -> "Net":
        arcs = dict(self.arcs)
        del arcs[key]
        return replace(self, arcs=arcs)

    def with_marking(self, marking: Mapping[int, float]) -> "Net":
        places = dict(self.places)
        for pid, value in marking.items():
            places[pid] = replace(places[pid], m=value)
        return replace(self, places=places)


def _arc_order(arc: Arc):
    rank = ARC_KINDS.index(arc.kind) if arc.kind in ARC_KINDS else len(ARC_KINDS)
    return (arc.source, arc.target, rank)


def build_net(places: Iterable = (), transitions: Iterable = (), arcs: Iterable = ()) -> Net:
    """Assemble and validate a net, raising :class:`NetError` on any violation.

    ``places`` and ``transitions`` may contain node records or bare ids;
    ``arcs`` may contain :class:`Arc` records or ``(source, target)`` pairs.
    """
    diags: list[Diagnostic] = []
    place_map: dict[int, Place] = {}
    trans_map: dict[int, Transition] = {}
    for p in places:
        p = p if isinstance(p, Place) else Place(int(p))
        if p.id in place_map:
            diags.append(Diagnostic("DuplicateId", f"place {p.id} defined twice", (p.id,)))
        place_map[p.id] = p
    for t in transitions:
        t = t if isinstance(t, Transition) else Transition(int(t))
        if t.id in trans_map or t.id in place_map:
            diags.append(Diagnostic("DuplicateId", f"id {t.id} defined twice", (t.id,)))
        trans_map[t.id] = t
    arc_map: dict[tuple, Arc] = {}
    for a in arcs:
        a = a if isinstance(a, Arc) else Arc(*a)
        if a.key in arc_map:
            diags.append(Diagnostic("DuplicateArc", f"arc {a.key} given twice; use weight w",
                                    (a.source, a.target)))
        arc_map[a.key] = a
    net = Net(place_map, trans_map, arc_map)
    diags.extend(validate(net))
    if diags:
        raise NetError(diags)
    return net


def validate(net: Net) -> list[Diagnostic]:
    """Return every violated invariant of ``net``; empty means valid."""
    out: list[Diagnostic] = []
    for pid in sorted(set(net.places) & set(net.transitions)):
        out.append(Diagnostic("DuplicateId", f"id {pid} is both a place and a transition", (pid,)))
    for pid, p in sorted(net.places.items()):
        if pid != p.id:
            out.append(Diagnostic("IdMismatch", f"place keyed {pid} has id {p.id}", (pid,)))
        if not isinstance(pid, int) or pid < 1:
            out.append(Diagnostic("BadId", f"node id {pid!r} is not a positive integer", (pid,)))
        if p.kind not in (CONTINUOUS, DISCRETE):
            out.append(Diagnostic("BadKind", f"place {pid} has kind {p.kind!r}", (pid,)))
        if not math.isfinite(p.m) or p.m < 0:
            out.append(Diagnostic("NegativeMarking", f"place {pid} has marking {p.m}", (pid,)))
        elif p.kind == DISCRETE and not float(p.m).is_integer():
            out.append(Diagnostic("FractionalMarking",
                                  f"discrete place {pid} has marking {p.m}", (pid,)))
    for tid, t in sorted(net.transitions.items()):
        if tid != t.id:
            out.append(Diagnostic("IdMismatch", f"transition keyed {tid} has id {t.id}", (tid,)))
        if not isinstance(tid, int) or tid < 1:
            out.append(Diagnostic("BadId", f"node id {tid!r} is not a positive integer", (tid,)))
        if t.kind not in (CONTINUOUS, DISCRETE):
            out.append(Diagnostic("BadKind", f"transition {tid} has kind {t.kind!r}", (tid,)))
        if not t.delay >= 0:
            out.append(Diagnostic("NegativeDelay", f"transition {tid} has delay {t.delay}", (tid,)))
    readable: dict[int, set[int]] = {}
    known = net.places.keys() | net.transitions.keys()
    for key, a in sorted(net.arcs.items(), key=lambda kv: _arc_order(kv[1])):
        ids = (a.source, a.target)
        if key != a.key:
            out.append(Diagnostic("IdMismatch", f"arc keyed {key} is {a.key}", ids))
        if a.kind not in ARC_KINDS:
            out.append(Diagnostic("BadKind", f"arc {ids} has kind {a.kind!r}", ids))
        if a.source not in known or a.target not in known:
            out.append(Diagnostic("DanglingArc", f"arc {a.source}->{a.target} has a missing endpoint", ids))
            continue
        p_to_t = a.source in net.places and a.target in net.transitions
        t_to_p = a.source in net.transitions and a.target in net.places
        if not (p_to_t or t_to_p):
            out.append(Diagnostic("NonBipartiteArc",
                                  f"arc {a.source}->{a.target} joins two nodes of one class", ids))
        elif t_to_p and a.kind != NORMAL:
            out.append(Diagnostic("NonBipartiteArc",
                                  f"{a.kind} arc {a.source}->{a.target} must run place to transition", ids))
        if not (isinstance(a.w, int) and a.w >= 1):
            out.append(Diagnostic("BadWeight", f"arc {ids} has weight {a.w!r}", ids))
        if not a.k >= 0:
            out.append(Diagnostic("NegativeThreshold", f"arc {ids} has threshold {a.k}", ids))
        if p_to_t:
            readable.setdefault(a.target, set()).add(a.source)
    for tid, t in sorted(net.transitions.items()):
        missing = sorted(t.speed.refs() - readable.get(tid, set()))
        if missing:
            out.append(Diagnostic("BadSpeedRef",
                                  f"speed of transition {tid} reads {missing} without an input arc",
                                  (tid, *missing)))
    return out


def marking_vector(net: Net) -> Marking:
    """Snapshot of every place marking, keyed by place id."""
    return {pid: net.places[pid].m for pid in sorted(net.places)}


def _graph(net: Net) -> nx.DiGraph:
    g = nx.DiGraph()
    for pid, p in net.places.items():
        g.add_node(pid, sig=("P", p.kind, p.m, p.display, p.boost))
    for tid, t in net.transitions.items():
        g.add_node(tid, sig=("T", t.kind, t.delay, t.speed.shape()))
    for a in net.arcs.values():
        data = g.get_edge_data(a.source, a.target)
        labels = data["arcs"] if data else frozenset()
        g.add_edge(a.source, a.target, arcs=labels | {(a.kind, a.k, a.w)})
    return g


def find_isomorphism(a: Net, b: Net) -> dict[int, int] | None:
    """Return a node bijection a→b preserving classes, kinds and parameters."""
    if (len(a.places), len(a.transitions), len(a.arcs)) != (
        len(b.places), len(b.transitions), len(b.arcs)
    ):
        return None
    ga, gb = _graph(a), _graph(b)
    matcher = DiGraphMatcher(
        ga, gb,
        node_match=lambda x, y: x["sig"] == y["sig"],
        edge_match=lambda x, y: x["arcs"] == y["arcs"],
    )
    for mapping in matcher.isomorphisms_iter():
        if all(t.speed.remap(mapping) == b.transitions[mapping[tid]].speed
               for tid, t in a.transitions.items()):
            return mapping
    return None


def isomorphic(a: Net, b: Net) -> bool:
    """True iff the nets agree up to renumbering of node ids."""
    return find_isomorphism(a, b) is not None


def renumber(net: Net, mapping: Mapping[int, int]) -> Net:
    """Rename node ids through ``mapping`` (ids not mentioned are kept)."""
    get = lambda i: mapping.get(i, i)  # noqa: E731
    places = {get(pid): replace(p, id=get(pid)) for pid, p in net.places.items()}
    transitions = {
        get(tid): replace(t, id=get(tid), speed=t.speed.remap(mapping))
        for tid, t in net.transitions.items()
    }
    arcs = {}
    for a in net.arcs.values():
        b = replace(a, source=get(a.source), target=get(a.target))
        arcs[b.key] = b
    return Net(places, transitions, arcs, net.under_transformation)
