import math

import pytest
from hypothesis import given, settings, strategies as st

from conftest import COMPLEX_EM_FORM, COMPLEX_RM_FORM, nets
from pnfusion import gadgets as g
from pnfusion.engine import Event, SimState, run
from pnfusion.errors import (
    AlreadyAttached,
    EmptyTargetSet,
    InvalidParams,
    NegativeValue,
    NotAReceptor,
    NotAnEffector,
    NotAttached,
    UnknownTarget,
    WrongTargetClass,
)
from pnfusion.formula import emit, parse
from pnfusion.net import Net, Place, Transition, isomorphic, validate

MAIN = "1{v=1}I2{m=4}C3{v=0.5}I4"


def main_columns(trace, net):
    keep = [f"p{p}" for p in sorted(net.places)] + [
        f"t{t}_v" for t in sorted(net.transitions)]
    return {c: trace.column(c) for c in keep}


def test_rm_numbering_and_shape():
    net = parse(MAIN)
    rm = g.build_rm(2)
    out = g.attach(net, rm)
    assert rm.ids == {-1: 2, 1: 5, 2: 6, 3: 7}
    assert out.places[6].display
    assert not validate(out)
    assert emit(out) == "1I2{m=4}(C3{v=0.5}I4,A5{v=m2}I6C7{v=m6})"


def test_rm_reads_previous_step():
    net = parse(MAIN)
    rm = g.build_rm(2)
    trace = run(net, 6, gadgets=[rm])
    target, display = trace.marking(2), trace.marking(rm.host("display"))
    assert display[0] == 0
    assert display[1:] == target[:-1]


def test_rm_cumulative_mode_sums():
    net = parse(MAIN)
    rm = g.build_rm(2, rate=0)
    trace = run(net, 6, gadgets=[rm])
    target, display = trace.marking(2), trace.marking(rm.host("display"))
    for n in range(1, 7):
        assert display[n] == pytest.approx(sum(target[:n]), abs=1e-12)


def test_rm_threshold_blocks_small_markings():
    net = parse("1{m=2}")
    rm = g.build_rm(1, thresh=3)
    trace = run(net, 3, gadgets=[rm])
    assert trace.marking(rm.host("display")) == [0, 0, 0, 0]


def test_rm_delay():
    rm = g.build_rm(1, tau=2)
    trace = run(parse("1{m=5}"), 4, gadgets=[rm])
    assert trace.marking(rm.host("display")) == [0, 0, 0, 5, 5]


@pytest.mark.parametrize("cap, first", [(4, 3), (3, 4), (2.5, 4), (10, 1), (20, 1)])
def test_capacity_fill(cap, first):
    rm = g.build_rm(1, cap=cap)
    trace = run(parse("1{m=10}"), 6, gadgets=[rm])
    shown = trace.marking(rm.host("display"))
    assert shown.index(10) == first
    assert all(x == 10 for x in shown[first:])


def test_capacity_fill_tracks_a_falling_target():
    rm = g.build_rm(1, cap=4)
    trace = run(parse("1{m=10}C2{v=3}"), 8, gadgets=[rm])
    target, shown = trace.marking(1), trace.marking(rm.host("display"))
    for n in range(1, 9):
        step = min(4, max(0, target[n - 1] - shown[n - 1]))
        excess = max(0, shown[n - 1] - target[n - 1])
        assert shown[n] == pytest.approx(shown[n - 1] + step - excess)


def test_rv_reads_transition_speed():
    net = parse(MAIN)
    rv = g.build_rv(3)
    trace = run(net, 6, gadgets=[rv])
    speed, display = trace.speed(3), trace.marking(rv.host("display"))
    assert display[1:] == speed[:-1]


def skeleton(net, drop=()):
    """Structure only: default node records, arcs kept as they are."""
    return Net({i: Place(i) for i in net.places if i not in drop},
               {i: Transition(i) for i in net.transitions if i not in drop},
               {k: a for k, a in net.arcs.items() if a.source not in drop and a.target not in drop})


def test_complex_rm_sums():
    crm = g.build_complex_rm([1, 2])
    trace = run(parse("(1{m=3},2{m=4})"), 3, gadgets=[crm])
    assert trace.marking(crm.host("display"))[1:] == [7, 7, 7]


def test_complex_rm_structure_is_the_reference_form():
    crm = g.build_complex_rm([1, 2])
    out = g.attach(parse("(1{m=0},2{m=0})"), crm)
    assert skeleton(out) == parse(COMPLEX_RM_FORM)


@pytest.mark.parametrize("m_cmd", [0, 1, 6, 10])
@pytest.mark.parametrize("cap", [None, 1, 2.5, 4])
def test_em_conserves(m_cmd, cap):
    em = g.build_em(1, m_cmd=m_cmd, cap=cap)
    trace = run(parse("1{m=0}"), 15, gadgets=[em])
    internal = [trace.marking(em.host(r)) for r in ("budget", "store")]
    for n in range(16):
        total = trace.marking(1)[n] + internal[0][n] + internal[1][n]
        assert total == pytest.approx(m_cmd, abs=1e-12)
    assert trace.marking(1)[-1] == pytest.approx(m_cmd, abs=1e-12)


def test_em_rate_limits_feed():
    em = g.build_em(1, m_cmd=6, rate=2)
    trace = run(parse("1{m=0}"), 5, gadgets=[em])
    assert trace.marking(1) == [0, 0, 2, 4, 6, 6]


def test_complex_em_splits_by_rate():
    cem = g.build_complex_em([1, 2], [1, 3], m_cmd=8)
    out = g.attach(parse("(1{m=0},2{m=0})"), cem)
    assert emit(out).count("C") == 3
    trace = run(out, 10)
    assert trace.marking(1)[-1] + trace.marking(2)[-1] == pytest.approx(8)
    assert trace.marking(1)[2] == 1 and trace.marking(2)[2] == 3


def test_complex_em_reference_form():
    cem = g.build_complex_em([1, 2], [1, 1])
    out = g.attach(parse("(1{m=0},2{m=0})"), cem)
    # apart from the budget place feeding the source it is the reference form
    assert isomorphic(skeleton(out, drop={cem.host("budget")}), parse(COMPLEX_EM_FORM))


def test_ev_adds_level_to_speed():
    net = parse("1{m=10}C2{v=0.2}I3")
    ev = g.build_ev(2, m_cmd=0.5)
    trace = run(net, 3, gadgets=[ev])
    assert trace.speed(2)[0] == pytest.approx(0.2)
    assert trace.speed(2)[1:] == [pytest.approx(0.7)] * 3


def test_ev_command_changes_level():
    net = parse("1{m=100}C2{v=0.2}I3")
    ev = g.build_ev(2, m_cmd=0.5)
    out = g.attach(net, ev)
    trace = run(out, 4, gadgets=[ev], events=[Event(2, g.Command(ev, 1.5))])
    assert [round(v, 9) for v in trace.speed(2)] == [0.2, 0.7, 0.7, 1.7, 1.7]


def test_em_command_refills_budget():
    em = g.build_em(1, m_cmd=0)
    net = g.attach(parse("1{m=0}"), em)
    state = SimState.initial(net)
    g.command(state, em, 4)
    assert state.pending and state.marking[em.host("budget")] == 0
    state.pending.pop().apply(state)
    assert state.marking[em.host("budget")] == 4


def test_attach_errors():
    net = parse(MAIN)
    with pytest.raises(UnknownTarget):
        g.attach(net, g.build_rm(99))
    with pytest.raises(WrongTargetClass):
        g.attach(net, g.build_rm(1))
    with pytest.raises(WrongTargetClass):
        g.attach(net, g.build_rv(2))
    rm = g.build_rm(2)
    out = g.attach(net, rm)
    with pytest.raises(AlreadyAttached):
        g.attach(out, rm)
    with pytest.raises(NotAttached):
        g.detach(net, g.build_rm(2))
    with pytest.raises(EmptyTargetSet):
        g.build_complex_rm([])
    with pytest.raises(InvalidParams):
        g.build_rm(2, cap=-1)
    with pytest.raises(InvalidParams):
        g.build_em(2, m_cmd=math.inf)


def test_read_and_command_roles():
    net = parse(MAIN)
    rm, em = g.build_rm(2), g.build_em(2)
    state = SimState.initial(g.attach(g.attach(net, rm), em))
    assert g.read(state, rm) == 0
    with pytest.raises(NotAReceptor):
        g.read(state, em)
    with pytest.raises(NotAnEffector):
        g.command(state, rm, 1)
    with pytest.raises(NegativeValue):
        g.command(state, em, -1)


def test_attach_detach_restores_net():
    net = parse(MAIN)
    for gadget in (g.build_rm(2), g.build_rv(3), g.build_em(4, m_cmd=2), g.build_ev(1),
                   g.build_complex_rm([2, 4]), g.build_complex_em([2, 4], [1, 2])):
        out = g.attach(net, gadget)
        assert len(out) > len(net)
        assert g.detach(out, gadget) == net
        assert not gadget.attached


def test_attach_and_detach_by_event():
    net = parse(MAIN)
    rm = g.build_rm(2)
    seen = []
    trace = run(net, 6, gadgets=[rm], policies=[lambda r: seen.append(dict(r))],
                events=[Event(2, g.Attach(rm)), Event(4, g.Detach(rm))])
    # the column set is fixed when the run starts
    assert trace.columns == run(net, 6).columns
    assert trace.rows == run(net, 6).rows
    assert [list(r) for r in seen] == [[], [], ["rm2"], ["rm2"], [], [], []]
    assert seen[3]["rm2"] == trace.marking(2)[2]


@settings(max_examples=40, deadline=None)
@given(nets(max_nodes=8, min_nodes=2), st.data())
def test_receptors_do_not_disturb(net, data):
    if not net.places or not net.transitions:
        return
    p = data.draw(st.sampled_from(sorted(net.places)))
    t = data.draw(st.sampled_from(sorted(net.transitions)))
    base = run(net, 20)
    watched = run(net, 20, gadgets=[g.build_rm(p), g.build_rv(t)])
    for column, values in main_columns(base, net).items():
        if column in base.columns:
            assert watched.column(column) == values
