"""Exception types shared across the package."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Diagnostic:
    """One violated net invariant."""

    code: str
    message: str
    ids: tuple = ()

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


class PetriError(Exception):
    """Base class for all package errors."""


class NetError(PetriError, ValueError):
    """A net failed validation. ``diagnostics`` lists every violation found."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))

    @property
    def codes(self) -> list[str]:
        return [d.code for d in self.diagnostics]


@dataclass
class ParseDiagnostic:
    offset: int
    message: str
    expected: frozenset = field(default_factory=frozenset)

    def render(self, filename: str = "<input>") -> str:
        return f"{filename}:{self.offset}: {self.message}"


class FormulaError(PetriError, ValueError):
    """Base for formula-level failures; ``diagnostic`` locates the problem."""

    def __init__(self, diagnostic: ParseDiagnostic):
        self.diagnostic = diagnostic
        super().__init__(f"offset {diagnostic.offset}: {diagnostic.message}")


class FormulaSyntaxError(FormulaError):
    pass


class IndexClassClash(FormulaError):
    pass


class ConflictingNodeParams(FormulaError):
    pass


class EmptyGroup(FormulaError):
    pass


class ParamConflict(PetriError, ValueError):
    pass


class WrongEndpointClass(PetriError, ValueError):
    pass


class UnknownScopeId(PetriError, KeyError):
    pass


class GadgetError(PetriError):
    pass


class InvalidParams(GadgetError, ValueError):
    pass


class EmptyTargetSet(InvalidParams):
    pass


class UnknownTarget(GadgetError, KeyError):
    pass


class WrongTargetClass(GadgetError, ValueError):
    pass


class AlreadyAttached(GadgetError):
    pass


class NotAttached(GadgetError):
    pass


class NotAReceptor(GadgetError, TypeError):
    pass


class NotAnEffector(GadgetError, TypeError):
    pass


class NegativeValue(GadgetError, ValueError):
    pass


class SimulationError(PetriError):
    pass


class NonFiniteSpeed(SimulationError, ArithmeticError):
    pass


class NegativeMarkingBug(SimulationError, ArithmeticError):
    pass


class UnderTransformation(SimulationError):
    """The net is mid-defusion and may not be executed."""


class ScenarioError(PetriError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")
