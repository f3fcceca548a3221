from pathlib import Path

import pytest

from pnfusion.errors import FormulaError, NetError, ScenarioError
from pnfusion.scenario import load, loads

SCENARIO = Path(__file__).resolve().parents[1] / "scenarios" / "closed_loop.scn"

SMALL = """
[net]
1I2C3I4   # chain
[params]
t1.v=2
t3.v=min(1,m2)
p2.m=1
arc 2 3.k=0.5
[gadgets]
rm name=r target=2 cap=unlimited
em name=e target=4 m=3 cap=1
[run]
steps=5 dt=1
[events]
at 2 set p2.m=0
at 3 command e 2
"""


def test_small_scenario():
    sc = loads(SMALL)
    assert sc.steps == 5 and sc.net.transitions[1].speed.evaluate({}) == 2
    assert sc.net.arcs[(2, 3, "normal")].k == 0.5
    trace = sc.run()
    assert len(trace.rows) == 6
    assert trace.marking(2)[2] == 0
    # p4 gets everything t3 moved plus the 3 + 2 tokens sent by the effector
    long = loads(SMALL).run(steps=12)
    assert long.marking(4)[-1] == pytest.approx(5 + sum(long.speed(3)[:-1]), abs=1e-12)


def test_build_is_repeatable():
    sc = load(SCENARIO)
    assert sc.run().to_csv() == sc.run().to_csv()


@pytest.mark.parametrize("text, error", [
    ("[params]\np1.m=1\n[net]\n1C2", ScenarioError),
    ("[net]\n1C2\n[params]\np9.m=1", ScenarioError),
    ("[net]\n1C2\n[params]\np1.m=-1", NetError),
    ("[net]\n1C2\n[params]\nt2.v=m7", NetError),
    ("[net]\n1C2\n[gadgets]\nrm target=9", NetError),
    ("[net]\n1C2\n[gadgets]\nxx target=1", ScenarioError),
    ("[net]\n1C2\n[gadgets]\nrm target=1 bogus=1", ScenarioError),
    ("[net]\n1C2\n[solver]\nsetpoint=1 gain=1 receptor=a effector=b", ScenarioError),
    ("[net]\n1C2\n[events]\nat 1 set p7.m=1", ScenarioError),
    ("[net]\n1C2\n[events]\nat x set p1.m=1", ScenarioError),
    ("[net]\n1C2(", FormulaError),
    ("[run]\nsteps=1", ScenarioError),
    ("[net]\n1C2\n[wat]", ScenarioError),
])
def test_errors(text, error):
    with pytest.raises(error):
        loads(text)


def test_formula_offsets_are_file_offsets():
    text = "# header\n[net]\n1I2C3X\n"
    with pytest.raises(FormulaError) as err:
        loads(text)
    assert err.value.diagnostic.offset == text.index("X")


def test_policy_mode_replaces_solvers():
    sc = load(SCENARIO)
    net, gadgets, solvers, policies, events = sc.build(as_policy=True)
    assert not solvers and len(policies) == 2
    assert 19 not in net.transitions
