"""Speed expressions for continuous transitions.

A speed is a small arithmetic tree over constants and place markings::

    >>> e = parse_speed("0.5*min(m2, 4)")
    >>> e.evaluate({2: 10.0})
    2.0
    >>> str(e)
    '0.5*min(m2,4)'

``inf`` is accepted as a constant and means "as fast as the input places
allow"; the engine bounds it by flow limiting.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Union

from .errors import PetriError


class SpeedSyntaxError(PetriError, ValueError):
    def __init__(self, text: str, offset: int, message: str):
        self.text = text
        self.offset = offset
        super().__init__(f"{message} at offset {offset} in {text!r}")


def format_number(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if float(x).is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(float(x))


@dataclass(frozen=True)
class Const:
    value: float

    def evaluate(self, marking: Mapping[int, float]) -> float:
        return self.value

    def refs(self) -> frozenset:
        return frozenset()

    def remap(self, mapping: Mapping[int, int]) -> "Const":
        return self

    def shape(self) -> str:
        return str(self)

    def __str__(self) -> str:
        return format_number(self.value)


@dataclass(frozen=True)
class Ref:
    place: int

    def evaluate(self, marking: Mapping[int, float]) -> float:
        return marking[self.place]

    def refs(self) -> frozenset:
        return frozenset((self.place,))

    def remap(self, mapping: Mapping[int, int]) -> "Ref":
        return Ref(mapping.get(self.place, self.place))

    def shape(self) -> str:
        return "m?"

    def __str__(self) -> str:
        return f"m{self.place}"


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_OPS: dict[str, Callable[[float, float], float]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": lambda a, b: _div(a, b),
    "min": min,
    "max": max,
}


def _div(a: float, b: float) -> float:
    if b == 0:
        if a == 0:
            return math.nan
        return math.copysign(math.inf, a)
    return a / b


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "SpeedExpr"
    right: "SpeedExpr"

    def evaluate(self, marking: Mapping[int, float]) -> float:
        a = self.left.evaluate(marking)
        b = self.right.evaluate(marking)
        # inf*0 and inf-inf give nan; the engine reports it
        return _OPS[self.op](a, b)

    def refs(self) -> frozenset:
        return self.left.refs() | self.right.refs()

    def remap(self, mapping: Mapping[int, int]) -> "BinOp":
        return BinOp(self.op, self.left.remap(mapping), self.right.remap(mapping))

    def shape(self) -> str:
        return _render(self, lambda e: e.shape())

    def __str__(self) -> str:
        return _render(self, str)


def _prec(e: "SpeedExpr") -> int:
    if isinstance(e, BinOp) and e.op in _PREC:
        return _PREC[e.op]
    return 3


def _render(e: BinOp, leaf: Callable) -> str:
    if e.op in ("min", "max"):
        return f"{e.op}({leaf(e.left)},{leaf(e.right)})"
    p = _PREC[e.op]
    left = leaf(e.left)
    if _prec(e.left) < p:
        left = f"({left})"
    right = leaf(e.right)
    if _prec(e.right) <= p:
        right = f"({right})"
    return f"{left}{e.op}{right}"


SpeedExpr = Union[Const, Ref, BinOp]


def const(x: float) -> Const:
    return Const(float(x))


def is_constant(e: SpeedExpr) -> bool:
    return not e.refs()


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)"
    r"|(?P<inf>inf)|(?P<fn>min|max)|(?P<ref>m\d+|m\(\s*\d+\s*\))|(?P<op>[-+*/(),]))"
)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            match = _TOKEN.match(text, pos)
            if not match or match.end() == pos:
                raise SpeedSyntaxError(text, pos, "unexpected character")
            kind = match.lastgroup
            self.tokens.append((kind, match.group(kind), match.start(kind)))
            pos = match.end()
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("eof", "", len(self.text))

    def take(self, value: str | None = None):
        tok = self.peek()
        if value is not None and tok[1] != value:
            raise SpeedSyntaxError(self.text, tok[2], f"expected {value!r}")
        if tok[0] == "eof":
            raise SpeedSyntaxError(self.text, tok[2], "unexpected end of expression")
        self.i += 1
        return tok

    def expr(self) -> SpeedExpr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> SpeedExpr:
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> SpeedExpr:
        kind, value, offset = self.take()
        if kind == "num":
            return Const(float(value))
        if kind == "inf":
            return Const(math.inf)
        if kind == "ref":
            return Ref(int(re.sub(r"\D", "", value)))
        if kind == "fn":
            self.take("(")
            left = self.expr()
            self.take(",")
            right = self.expr()
            self.take(")")
            return BinOp(value, left, right)
        if value == "(":
            node = self.expr()
            self.take(")")
            return node
        raise SpeedSyntaxError(self.text, offset, f"unexpected {value!r}")


def parse_speed(text: str) -> SpeedExpr:
    """Parse ``text`` into a speed expression tree."""
    parser = _Parser(text)
    if not parser.tokens:
        raise SpeedSyntaxError(text, 0, "empty expression")
    node = parser.expr()
    if parser.peek()[0] != "eof":
        raise SpeedSyntaxError(text, parser.peek()[2], "trailing input")
    return node


def as_speed(value) -> SpeedExpr:
    """Coerce a number, string or tree into a speed expression."""
    if isinstance(value, (Const, Ref, BinOp)):
        return value
    if isinstance(value, (int, float)):
        return Const(float(value))
    return parse_speed(str(value))
