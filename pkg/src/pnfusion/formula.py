"""Parser and emitter for structural-unit net formulas.

A formula strings unit letters together with node indices::

    1I2C3I4        t1 -> p2 -> t3 -> p4
    (1A,2B)3I4     p1 -A-> t3, p2 -B-> t3, t3 -> p4

``C`` is place->transition, ``I`` transition->place, ``A`` an associative
and ``B`` an inhibitory place->transition arc. An index between two
elements is the post-index of the left one and the pre-index of the right
one. An index before ``(`` fills every branch's leading empty slot, an
index after ``)`` every branch's trailing empty slot.

Where the two sides of an index cannot share a node (for example ``A20B``,
whose left side is a transition slot and right side a place slot) the index
belongs to the right-hand unit and the left slot stays open, as if a comma
stood before the index. Slots left open at the top level get fresh ids.

Braces after an index set node parameters (``m`` for places, ``v`` and
``d`` for transitions); braces after a letter set arc parameters (``k``,
``w``). ``v`` accepts a speed expression such as ``{v=0.5*m2}``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable

from .errors import (
    ConflictingNodeParams,
    EmptyGroup,
    FormulaSyntaxError,
    IndexClassClash,
    ParseDiagnostic,
)
from .net import (
    ASSOCIATIVE,
    INHIBITORY,
    NORMAL,
    Arc,
    Net,
    Place,
    Transition,
)
from .speed import Const, SpeedSyntaxError, format_number, parse_speed

LETTERS = "CIAB"
LETTER_KIND = {"C": NORMAL, "I": NORMAL, "A": ASSOCIATIVE, "B": INHIBITORY}
KIND_LETTER = {NORMAL: "C", ASSOCIATIVE: "A", INHIBITORY: "B"}
PLACE, TRANS = "P", "T"
NODE_KEYS = {"m": PLACE, "v": TRANS, "d": TRANS}
ARC_KEYS = ("k", "w")

_SUB = str.maketrans("₀₁₂₃₄₅₆₇₈₉⁰¹²³⁴⁵⁶⁷⁸⁹", "01234567890123456789")


def normalize(text: str) -> str:
    """Flatten sub/superscript digits and drop typographic spacing."""
    return text.translate(_SUB)


# ---------------------------------------------------------------- syntax


@dataclass
class _Tok:
    kind: str  # idx, letter, (, ), ",", braces, eof
    value: object
    offset: int


@dataclass
class _Idx:
    n: int
    params: dict
    offset: int


@dataclass
class _Letter:
    letter: str
    params: dict
    offset: int


@dataclass
class _Group:
    branches: list
    offset: int


def _byte_offset(text: str, i: int) -> int:
    return len(text[:i].encode("utf-8"))


def _fail(cls, text: str, i: int, message: str, expected=()):
    raise cls(ParseDiagnostic(_byte_offset(text, i), message, frozenset(expected)))


def _strip_comments(text: str) -> str:
    # keep offsets stable: blank out comment bodies instead of deleting them
    return re.sub(r"#[^\n]*", lambda m: " " * len(m.group(0)), text)


def _split_top(body: str) -> list[tuple[str, int]]:
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(body):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append((body[start:i], start))
            start = i + 1
    parts.append((body[start:], start))
    return parts


def _parse_braces(text: str, start: int, end: int) -> dict:
    body = text[start + 1:end]
    params: dict = {}
    for part, off in _split_top(body):
        pos = start + 1 + off
        if "=" not in part:
            _fail(FormulaSyntaxError, text, pos, "expected key=value in braces", ("m", "v", "d", "k", "w"))
        key, value = (s.strip() for s in part.split("=", 1))
        if key not in ("m", "v", "d", "k", "w"):
            _fail(FormulaSyntaxError, text, pos, f"unknown parameter {key!r}", ("m", "v", "d", "k", "w"))
        if key in params:
            _fail(FormulaSyntaxError, text, pos, f"parameter {key!r} given twice")
        try:
            if key == "v":
                params[key] = parse_speed(value)
            elif key == "w":
                w = float(value)
                if not w.is_integer() or w < 1:
                    raise ValueError
                params[key] = int(w)
            else:
                x = float(value)
                if not x >= 0:
                    raise ValueError
                params[key] = x
        except (ValueError, SpeedSyntaxError):
            _fail(FormulaSyntaxError, text, pos, f"bad value {value!r} for {key!r}")
    return params


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            value = int(text[i:j])
            if value < 1:
                _fail(FormulaSyntaxError, text, i, "indices must be positive integers")
            toks.append(_Tok("idx", value, i))
            i = j
        elif ch in LETTERS:
            toks.append(_Tok("letter", ch, i))
            i += 1
        elif ch in "(),":
            toks.append(_Tok(ch, ch, i))
            i += 1
        elif ch == "{":
            depth, j = 0, i + 1
            while j < n and not (text[j] == "}" and depth == 0):
                depth += text[j] == "("
                depth -= text[j] == ")"
                j += 1
            if j >= n:
                _fail(FormulaSyntaxError, text, i, "unterminated '{'", ("}",))
            toks.append(_Tok("braces", _parse_braces(text, i, j), i))
            i = j + 1
        else:
            _fail(FormulaSyntaxError, text, i, f"unexpected character {ch!r}",
                  ("index", "C", "I", "A", "B", "(", ")", ",", "{"))
    toks.append(_Tok("eof", None, n))
    return toks


class _Syntax:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def sequence(self, inside_group: bool) -> list:
        items: list = []
        while True:
            tok = self.peek()
            if tok.kind == "idx":
                self.i += 1
                if items and isinstance(items[-1], _Idx):
                    _fail(FormulaSyntaxError, self.text, tok.offset,
                          "two indices in a row", ("C", "I", "A", "B", "("))
                items.append(_Idx(tok.value, self._braces(), tok.offset))
            elif tok.kind == "letter":
                self.i += 1
                items.append(_Letter(tok.value, self._braces(), tok.offset))
            elif tok.kind == "(":
                self.i += 1
                branches = [self.sequence(True)]
                while self.peek().kind == ",":
                    self.i += 1
                    branches.append(self.sequence(True))
                close = self.peek()
                if close.kind != ")":
                    _fail(FormulaSyntaxError, self.text, close.offset, "expected ')'", (")", ","))
                self.i += 1
                if self.peek().kind == "braces":
                    _fail(FormulaSyntaxError, self.text, self.peek().offset,
                          "parameters must follow an index or a letter")
                items.append(_Group(branches, tok.offset))
            elif tok.kind == "braces":
                _fail(FormulaSyntaxError, self.text, tok.offset,
                      "parameters must follow an index or a letter")
            else:
                break
        tok = self.peek()
        if not items and (inside_group or tok.kind != "eof"):
            _fail(EmptyGroup if inside_group else FormulaSyntaxError, self.text, tok.offset,
                  "empty group branch" if inside_group else f"unexpected {tok.value!r}",
                  ("index", "C", "I", "A", "B", "("))
        if not inside_group and tok.kind != "eof":
            _fail(FormulaSyntaxError, self.text, tok.offset, f"unexpected {tok.value!r}",
                  ("index", "C", "I", "A", "B", "("))
        return items

    def _braces(self) -> dict:
        if self.peek().kind == "braces":
            tok = self.peek()
            self.i += 1
            return tok.value
        return {}


# ---------------------------------------------------------------- semantics


class _Anon:
    """A node without a written index, shared by adjacent slots."""

    def __init__(self):
        self.id: int | None = None


@dataclass(eq=False)
class _Slot:
    cls: str
    offset: int
    node: object = None  # int index or _Anon


@dataclass(eq=False)
class _Unit:
    letter: str
    params: dict
    offset: int
    pre: _Slot = field(init=False)
    post: _Slot = field(init=False)

    def __post_init__(self):
        pre_cls, post_cls = (TRANS, PLACE) if self.letter == "I" else (PLACE, TRANS)
        self.pre = _Slot(pre_cls, self.offset)
        self.post = _Slot(post_cls, self.offset)


class _Builder:
    def __init__(self, text: str):
        self.text = text
        self.units: list[_Unit] = []
        self.classes: dict[int, str] = {}
        self.node_params: dict[int, dict] = {}
        self.declared: list[_Idx] = []
        self.warnings: list[str] = []

    def declare(self, idx: _Idx):
        self.declared.append(idx)
        params = self.node_params.setdefault(idx.n, {})
        for key, value in idx.params.items():
            if key in params and params[key] != value:
                _fail(ConflictingNodeParams, self.text, idx.offset,
                      f"node {idx.n} given {key}={value} and {key}={params[key]}")
            params[key] = value
        for key in idx.params:
            self._set_class(idx.n, NODE_KEYS[key], idx.offset)

    def _set_class(self, n: int, cls: str, offset: int):
        known = self.classes.setdefault(n, cls)
        if known != cls:
            what = {PLACE: "place", TRANS: "transition"}
            _fail(IndexClassClash, self.text, offset,
                  f"index {n} used as both {what[known]} and {what[cls]}")

    def bind(self, slots: list[_Slot], target, offset: int):
        for slot in slots:
            slot.node = target
            if isinstance(target, int):
                self._set_class(target, slot.cls, offset)

    def interface(self, item) -> tuple[list, list]:
        if isinstance(item, _Letter):
            unit = _Unit(item.letter, item.params, item.offset)
            self.units.append(unit)
            return [unit.pre], [unit.post]
        left, right = [], []
        for branch in item.branches:
            bl, br = self.sequence(branch)
            left += bl
            right += br
        return left, right

    def sequence(self, items: list) -> tuple[list, list]:
        left_open: list[_Slot] = []
        right_open: list[_Slot] = []
        prev_right: list[_Slot] | None = None
        pending: _Idx | None = None
        for item in items:
            if isinstance(item, _Idx):
                self.declare(item)
                pending = item
                continue
            L, R = self.interface(item)
            if pending is not None:
                if prev_right is None or _same_class(prev_right + L):
                    self.bind((prev_right or []) + L, pending.n, pending.offset)
                else:
                    self.bind(L, pending.n, pending.offset)
                    right_open += prev_right
                    self.warnings.append(
                        f"offset {_byte_offset(self.text, pending.offset)}: index {pending.n} "
                        "cannot join both neighbours; left slot kept open")
                pending = None
            elif prev_right is None:
                left_open += L
            elif prev_right and L and _same_class(prev_right + L):
                self.bind(prev_right + L, _Anon(), item.offset)
            else:
                right_open += prev_right
                left_open += L
            prev_right = R
        if pending is not None:
            if prev_right:
                if not _same_class(prev_right):
                    _fail(IndexClassClash, self.text, pending.offset,
                          f"index {pending.n} closes slots of both classes")
                self.bind(prev_right, pending.n, pending.offset)
        elif prev_right is not None:
            right_open += prev_right
        return left_open, right_open

    def build(self, items: list) -> Net:
        self.sequence(items)
        explicit = set(self.node_params)
        fresh = _fresh_ids(explicit)
        for unit in self.units:
            for slot in (unit.pre, unit.post):
                if slot.node is None:
                    slot.node = next(fresh)
                    self.classes[slot.node] = slot.cls
                    self.warnings.append(
                        f"offset {_byte_offset(self.text, unit.offset)}: open slot of "
                        f"{unit.letter} received fresh id {slot.node}")
                elif isinstance(slot.node, _Anon):
                    if slot.node.id is None:
                        slot.node.id = next(fresh)
                        self.classes[slot.node.id] = slot.cls
                    slot.node = slot.node.id
        for idx in self.declared:
            if idx.n not in self.classes:
                _fail(FormulaSyntaxError, self.text, idx.offset,
                      f"index {idx.n} belongs to no unit and has no class-revealing parameter")
        places: dict[int, Place] = {}
        transitions: dict[int, Transition] = {}
        for n, cls in sorted(self.classes.items()):
            params = self.node_params.get(n, {})
            if cls == PLACE:
                places[n] = Place(n, m=params.get("m", 0.0))
            else:
                transitions[n] = Transition(n, speed=params.get("v", Const(1.0)),
                                            delay=params.get("d", 0.0))
        arcs: dict[tuple, Arc] = {}
        for unit in self.units:
            arc = Arc(unit.pre.node, unit.post.node, LETTER_KIND[unit.letter],
                      k=unit.params.get("k", 0.0), w=unit.params.get("w", 1))
            if arc.key in arcs:
                old = arcs[arc.key]
                if old.k != arc.k:
                    _fail(ConflictingNodeParams, self.text, unit.offset,
                          f"arc {arc.source}->{arc.target} given thresholds {old.k} and {arc.k}")
                arc = Arc(arc.source, arc.target, arc.kind, arc.k, old.w + arc.w)
            arcs[arc.key] = arc
        return Net(places, transitions, arcs)


def _same_class(slots: list[_Slot]) -> bool:
    return len({s.cls for s in slots}) <= 1


def _fresh_ids(used: set[int]):
    n = 1
    while True:
        if n not in used:
            yield n
        n += 1


def parse_with_warnings(text: str) -> tuple[Net, list[str]]:
    """Like :func:`parse`, also returning notes about fresh ids and open slots."""
    text = _strip_comments(normalize(text))
    items = _Syntax(text).sequence(inside_group=False)
    builder = _Builder(text)
    return builder.build(items), builder.warnings


def parse(text: str) -> Net:
    """Parse a formula into the net it denotes."""
    return parse_with_warnings(text)[0]


# ---------------------------------------------------------------- emission

_RANK = {"C": 0, "I": 1, "A": 2, "B": 3}


@dataclass(frozen=True)
class _U:
    pre: int
    letter: str
    post: int
    arc: Arc

    @property
    def order(self):
        return (self.pre, _RANK[self.letter], self.post)


def units_of(net: Net) -> list[_U]:
    out = []
    for arc in net.arcs.values():
        if arc.source in net.transitions:
            letter = "I"
        else:
            letter = KIND_LETTER[arc.kind]
        out.append(_U(arc.source, letter, arc.target, arc))
    return sorted(out, key=lambda u: u.order)


def arc_braces(arc: Arc) -> str:
    parts = []
    if arc.k != 0:
        parts.append(f"k={format_number(arc.k)}")
    if arc.w != 1:
        parts.append(f"w={arc.w}")
    return "{" + ",".join(parts) + "}" if parts else ""


def node_braces(node, force: bool = False) -> str:
    parts = []
    if isinstance(node, Place):
        if node.m != 0 or force:
            parts.append(f"m={format_number(node.m)}")
    else:
        if node.speed != Const(1.0) or force:
            parts.append(f"v={node.speed}")
        if node.delay != 0:
            parts.append(f"d={format_number(node.delay)}")
    return "{" + ",".join(parts) + "}" if parts else ""


@dataclass
class _Block:
    toks: list  # ("idx", n) | ("L", unit) | "(" | ")" | ","
    left: int | None
    right: int | None


def _path_block(path: list[_U]) -> _Block:
    toks: list = [("idx", path[0].pre)]
    for u in path:
        toks += [("L", u), ("idx", u.post)]
    return _Block(toks, path[0].pre, path[-1].post)


def _paths(units: list[_U]) -> list[list[_U]]:
    indeg: dict[int, int] = {}
    outdeg: dict[int, int] = {}
    for u in units:
        outdeg[u.pre] = outdeg.get(u.pre, 0) + 1
        indeg[u.post] = indeg.get(u.post, 0) + 1

    def through(x):
        return indeg.get(x, 0) == 1 and outdeg.get(x, 0) == 1

    by_pre: dict[int, list[_U]] = {}
    for u in units:
        by_pre.setdefault(u.pre, []).append(u)
    used: set = set()
    paths = []

    def walk(start: _U):
        path = [start]
        used.add(start)
        while through(path[-1].post):
            nxt = by_pre[path[-1].post][0]
            if nxt in used:
                break
            path.append(nxt)
            used.add(nxt)
        return path

    for u in units:
        if u not in used and not through(u.pre):
            paths.append(walk(u))
    for u in units:  # pure cycles
        if u not in used:
            paths.append(walk(u))
    return paths


def _structured(net: Net) -> list:
    blocks = [_path_block(p) for p in _paths(units_of(net))]
    hubs = sorted({b.left for b in blocks} | {b.right for b in blocks} - {None})
    for x in hubs:
        ins = [b for b in blocks if b.right == x and b.left != x]
        outs = [b for b in blocks if b.left == x and b.right != x]
        if len(ins) + len(outs) < 2:
            continue
        toks: list = []
        if len(ins) == 1:
            toks += ins[0].toks[:-1]
        elif ins:
            toks.append("(")
            for i, b in enumerate(ins):
                toks += ([","] if i else []) + b.toks[:-1]
            toks.append(")")
        toks.append(("idx", x))
        if len(outs) == 1:
            toks += outs[0].toks[1:]
        elif outs:
            toks.append("(")
            for i, b in enumerate(outs):
                toks += ([","] if i else []) + b.toks[1:]
            toks.append(")")
        left = ins[0].left if len(ins) == 1 else (x if not ins else None)
        right = outs[0].right if len(outs) == 1 else (x if not outs else None)
        merged = _Block(toks, left, right)
        blocks = [b for b in blocks if b not in ins and b not in outs] + [merged]
    return [b.toks for b in blocks]


def _flat(net: Net) -> list:
    return [_path_block([u]).toks for u in units_of(net)]


def _render(net: Net, pieces: list) -> str:
    linked = {a.source for a in net.arcs.values()} | {a.target for a in net.arcs.values()}
    isolated = sorted(net.ids - linked)
    pieces = list(pieces) + [[("iso", n)] for n in isolated]
    toks: list = []
    if len(pieces) == 1:
        toks = pieces[0]
    elif pieces:
        toks.append("(")
        for i, piece in enumerate(pieces):
            toks += ([","] if i else []) + piece
        toks.append(")")
    out, seen = [], set()
    for tok in toks:
        if isinstance(tok, str):
            out.append(tok)
        elif tok[0] == "L":
            out.append(tok[1].letter + arc_braces(tok[1].arc))
        else:
            n = tok[1]
            out.append(str(n))
            if n not in seen:
                seen.add(n)
                out.append(node_braces(net.node(n), force=tok[0] == "iso"))
    return "".join(out)


def formula_view(net: Net) -> Net:
    """The part of ``net`` a formula can express (no kinds, flags or labels)."""
    places = {pid: Place(pid, m=p.m) for pid, p in net.places.items()}
    transitions = {tid: Transition(tid, speed=t.speed, delay=t.delay)
                   for tid, t in net.transitions.items()}
    return Net(places, transitions, dict(net.arcs))


def emit(net: Net) -> str:
    """Return a canonical formula ``f`` with ``parse(f) == net``.

    Units are ordered by (pre-index, letter C<I<A<B, post-index), runs
    through single-in/single-out nodes become chains, and nodes shared by
    several chains are factored into bracket groups. If the factored text
    does not reproduce the net exactly, a flat group of units is used.
    """
    if net.is_empty():
        return ""
    core = formula_view(net)
    text = _render(net, _structured(net))
    try:
        if parse(text) == core:
            return text
    except Exception:  # noqa: BLE001 - any failure falls back to the flat form
        pass
    return _render(net, _flat(net))


def round_trip_check(text: str) -> bool:
    """True iff re-parsing the canonical emission reproduces the parsed net."""
    net = parse(text)
    return parse(emit(net)) == net


def unit_lines(net: Net) -> list[str]:
    """One self-contained formula per arc, carrying its endpoint parameters."""
    lines = []
    for u in units_of(net):
        pre, post = net.node(u.pre), net.node(u.post)
        lines.append(f"{u.pre}{node_braces(pre)}{u.letter}{arc_braces(u.arc)}"
                     f"{u.post}{node_braces(post)}")
    return lines


def iter_formula_lines(lines: Iterable[str]) -> Iterable[str]:
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if line:
            yield line
