import math

import pytest
from hypothesis import given, strategies as st

from pnfusion.speed import BinOp, Const, Ref, SpeedSyntaxError, as_speed, parse_speed


@pytest.mark.parametrize("text, marking, expected", [
    ("1", {}, 1.0),
    ("0.5*m2", {2: 4.0}, 2.0),
    ("m(2)+m3", {2: 1.0, 3: 2.0}, 3.0),
    ("min(m1,4)", {1: 10.0}, 4.0),
    ("max(0,20-m10)", {10: 23.0}, 0.0),
    ("2*(3+m1)", {1: 1.0}, 8.0),
    ("10-4-3", {}, 3.0),  # left associative
    ("12/3/2", {}, 2.0),
    ("inf", {}, math.inf),
    ("1e-3", {}, 0.001),
])
def test_evaluate(text, marking, expected):
    assert parse_speed(text).evaluate(marking) == expected


@pytest.mark.parametrize("bad", ["", "1+", "m", "min(1)", "(1", "2 3", "x1", "1)"])
def test_syntax_errors(bad):
    with pytest.raises(SpeedSyntaxError):
        parse_speed(bad)


def test_division_by_zero_is_not_an_exception():
    assert parse_speed("1/m1").evaluate({1: 0.0}) == math.inf
    assert math.isnan(parse_speed("0/m1").evaluate({1: 0.0}))


def test_refs_and_remap():
    e = parse_speed("m2*min(m3,m2)")
    assert e.refs() == {2, 3}
    assert str(e.remap({2: 7})) == "m7*min(m3,m7)"


def test_as_speed():
    assert as_speed(2) == Const(2.0)
    assert as_speed("m4") == Ref(4)
    e = BinOp("+", Const(1.0), Ref(1))
    assert as_speed(e) is e


def test_minimal_parentheses():
    assert str(parse_speed("(1-2)-3")) == "1-2-3"
    assert str(parse_speed("1-(2-3)")) == "1-(2-3)"
    assert str(parse_speed("(1+2)*3")) == "(1+2)*3"


leaves = st.one_of(
    st.floats(0, 1e6, allow_nan=False, allow_infinity=False).map(Const),
    st.integers(1, 30).map(Ref),
)
exprs = st.recursive(
    leaves,
    lambda sub: st.builds(BinOp, st.sampled_from(["+", "-", "*", "/", "min", "max"]), sub, sub),
    max_leaves=12,
)


@given(exprs)
def test_print_parse_round_trip(e):
    assert parse_speed(str(e)) == e
