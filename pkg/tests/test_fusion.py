import pytest
from hypothesis import given, settings, strategies as st

from conftest import ARC_KINDS_FORM, CLOSED_LOOP_FORM, corpus, nets
from pnfusion.errors import IndexClassClash, ParamConflict, UnknownScopeId, WrongEndpointClass
from pnfusion.formula import emit, parse
from pnfusion.fusion import StructuralUnit, compose, defuse, p_fuse, t_fuse, unit, w_fuse
from pnfusion.net import Place, Transition, isomorphic, validate


def test_unit_endpoint_classes():
    assert str(unit("C", 1, 2)) == "1C2"
    assert str(unit("I", 2, 3)) == "2I3"
    with pytest.raises(WrongEndpointClass):
        StructuralUnit("C", Transition(1), Place(2))
    with pytest.raises(WrongEndpointClass):
        StructuralUnit("I", Place(1), Place(2))


def test_defuse_arc_kinds():
    units, residue = defuse(parse(ARC_KINDS_FORM))
    assert [str(u) for u in units] == ["1A3", "2B3", "3I4"]
    assert residue.is_empty() and not residue.under_transformation


def test_t_fuse_rebuilds_arc_kinds():
    units = [unit("A", 1, 30), unit("B", 2, 31), unit("I", 32, 4)]
    assert emit(t_fuse(units, 3)) == "(1A,2B)3I4"


def test_p_fuse_shares_a_place():
    net = p_fuse([unit("C", 1, 3), unit("C", 2, 4)], 1)
    assert emit(net) == "1(C3,C4)"


def test_p_fuse_remaps_speed_references():
    u1 = StructuralUnit("C", Place(5), Transition(3, "m5"))
    net = p_fuse([u1, unit("C", 6, 4)], 1)
    assert net.transitions[3].speed.refs() == {1}
    assert not validate(net)


def test_fuse_conflicts_and_override():
    a = StructuralUnit("C", Place(1, m=2), Transition(3))
    b = StructuralUnit("C", Place(2, m=5), Transition(4))
    with pytest.raises(ParamConflict):
        p_fuse([a, b], 1)
    net = p_fuse([a, b], 1, override=Place(1, m=7))
    assert net.places[1].m == 7
    with pytest.raises(WrongEndpointClass):
        p_fuse([a], 3)


def test_compose_sums_weights_and_checks_thresholds():
    assert emit(compose(unit("C", 1, 2), unit("C", 1, 2))) == "1C{w=2}2"
    with pytest.raises(ParamConflict):
        compose(unit("C", 1, 2, k=1), unit("C", 1, 2, k=2))
    with pytest.raises(IndexClassClash):
        compose(unit("C", 1, 2), unit("C", 2, 3))


def test_partial_defuse_flags_residue():
    net = parse(CLOSED_LOOP_FORM)
    units, residue = defuse(net, {9, 10, 11})
    assert len(units) == 4
    assert residue.under_transformation
    assert compose(residue, units) == net
    with pytest.raises(UnknownScopeId):
        defuse(net, {99})


def test_defuse_keeps_isolated_nodes():
    net = parse("(1C2,7{m=3})")
    units, residue = defuse(net)
    assert list(residue.places) == [7]
    assert compose(residue, units) == net


@pytest.mark.parametrize("n", range(1, 11))
def test_w_fuse_multiplies(n):
    u = unit("C", 1, 2, w=3)
    assert w_fuse(u, n).w == 3 * n
    with pytest.raises(ValueError):
        w_fuse(u, 0)


@settings(max_examples=80, deadline=None)
@given(nets(max_nodes=10))
def test_defuse_compose_identity(net):
    units, residue = defuse(net)
    assert compose(residue, units) == net


@settings(max_examples=60, deadline=None)
@given(nets(max_nodes=10), st.data())
def test_partial_defuse_compose_identity(net, data):
    scope = data.draw(st.sets(st.sampled_from(sorted(net.ids))))
    units, residue = defuse(net, scope)
    assert compose(residue, units) == net


def test_compose_is_order_independent():
    for net in corpus(9, 40):
        units, _ = defuse(net)
        rebuilt = compose(list(reversed(units)))
        assert isomorphic(rebuilt, compose(units))
