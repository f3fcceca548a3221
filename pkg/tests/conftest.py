import random

import pytest
from hypothesis import strategies as st

from pnfusion.net import (
    ASSOCIATIVE,
    CONTINUOUS,
    DISCRETE,
    INHIBITORY,
    NORMAL,
    Arc,
    Net,
    Place,
    Transition,
    validate,
)
from pnfusion.speed import BinOp, Const, Ref

CLOSED_LOOP_FORM = "1I2(A9I10(C11,B14I13C)12I15C16I)2C3I4C5(I17(C18,A20B)19I20A)5I6C7I8"
ARC_KINDS_FORM = "(1A,2B)3I4"
PFUSE = "(1C,2C)3"
COMPLEX_RM_FORM = "(1A3I,2A4I)5C6"
COMPLEX_EM_FORM = "1I2(C3I4,C5I6)"


def random_net(rng: random.Random, max_nodes: int = 12, min_nodes: int = 1,
               discrete: bool = False, delays: bool = False, sparse_ids: bool = True) -> Net:
    """A valid random net; used as the shared corpus for several test files."""
    n = rng.randint(min_nodes, max_nodes)
    pool = range(1, 3 * n + 1) if sparse_ids else range(1, n + 1)
    ids = sorted(rng.sample(pool, n))
    is_place = {i: rng.random() < 0.5 for i in ids}
    places = [i for i in ids if is_place[i]]
    trans = [i for i in ids if not is_place[i]]
    arcs = {}
    for p in places:
        for t in trans:
            if rng.random() < 0.3:
                kind = rng.choices([NORMAL, ASSOCIATIVE, INHIBITORY], [6, 2, 2])[0]
                k = 0.0 if rng.random() < 0.6 else float(rng.randint(1, 6))
                if kind == INHIBITORY:
                    k = float(rng.randint(1, 8))
                w = rng.choice([1, 1, 1, 2, 3]) if kind == NORMAL else 1
                arcs[(p, t, kind)] = Arc(p, t, kind, k, w)
            if rng.random() < 0.3:
                arcs[(t, p, NORMAL)] = Arc(t, p, NORMAL, 0.0, rng.choice([1, 1, 2]))
    pnodes = {}
    dplaces = set()
    for p in places:
        d = discrete and rng.random() < 0.3
        m = float(rng.randint(0, 10)) if d or rng.random() < 0.5 else round(rng.uniform(0, 10), 3)
        pnodes[p] = Place(p, m, DISCRETE if d else CONTINUOUS)
        if d:
            dplaces.add(p)
    tnodes = {}
    for t in trans:
        readable = sorted(a.source for a in arcs.values() if a.target == t)
        roll = rng.random()
        if readable and roll < 0.3:
            speed = BinOp("*", Const(rng.choice([0.1, 0.25, 0.5])), Ref(rng.choice(readable)))
        elif readable and roll < 0.4:
            speed = BinOp("min", Const(rng.choice([1.0, 2.0])), Ref(rng.choice(readable)))
        else:
            speed = Const(rng.choice([0.5, 1.0, 1.5, 2.0, 3.0]))
        kind = DISCRETE if discrete and rng.random() < 0.25 else CONTINUOUS
        delay = float(rng.choice([0, 0, 0, 1, 2])) if delays else 0.0
        tnodes[t] = Transition(t, speed, kind, delay)
    net = Net(pnodes, tnodes, arcs)
    assert not validate(net), validate(net)
    return net


def corpus(seed: int, count: int, **kw) -> list[Net]:
    rng = random.Random(seed)
    return [random_net(rng, **kw) for _ in range(count)]


@st.composite
def nets(draw, max_nodes: int = 8, **kw):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_net(random.Random(seed), max_nodes=max_nodes, **kw)


# acceptance criteria report one line each at the end of the session
ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance():
    def report(number: int, ok: bool, detail: str = ""):
        ACCEPTANCE[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        print(ACCEPTANCE[number])
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
