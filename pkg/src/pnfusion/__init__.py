"""Hybrid functional Petri nets built from structural units.

Formulas describe nets, fusion operators assemble them, receptor and
effector gadgets observe and drive them, and a fixed-step engine runs them.
"""

from .engine import Event, RunConfig, SetMarking, SimState, Trace, enabled, effective_speed, register_policy, run, step
from .formula import emit, parse, parse_with_warnings
from .fusion import StructuralUnit, compose, defuse, p_fuse, t_fuse, unit, w_fuse
from .gadgets import (
    GadgetParams,
    attach,
    build_complex_em,
    build_complex_rm,
    build_em,
    build_ev,
    build_rm,
    build_rv,
    command,
    detach,
    read,
)
from .net import Arc, Net, Place, Transition, build_net, isomorphic, validate
from .solver import SetpointPolicy, SetpointSolver, build_setpoint_solver, wire

__all__ = [
    "Arc", "Event", "GadgetParams", "Net", "Place", "RunConfig", "SetMarking", "SetpointPolicy",
    "SetpointSolver", "SimState", "StructuralUnit", "Trace", "Transition", "attach",
    "build_complex_em", "build_complex_rm", "build_em", "build_ev", "build_net", "build_rm",
    "build_rv", "build_setpoint_solver", "command", "compose", "defuse", "detach", "effective_speed",
    "emit", "enabled", "isomorphic", "p_fuse", "parse", "parse_with_warnings", "read",
    "register_policy", "run", "step", "t_fuse", "unit", "validate", "w_fuse", "wire",
]
