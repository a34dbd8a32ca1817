"""Exception hierarchy shared by the scheduling package and the CLI."""

from typing import List, Sequence


class DelayShareError(Exception):
    """Base class for every error raised on purpose by delayshare."""


class CycleError(DelayShareError):
    """The precedence graph contains a cycle."""

    def __init__(self, cycle: Sequence, message: str = ""):
        self.cycle = list(cycle)
        if not message:
            path = " -> ".join(str(c) for c in self.cycle + self.cycle[:1])
            message = f"precedence cycle: {path}"
        super().__init__(message)


class DomainError(DelayShareError, ValueError):
    """An argument lies outside the domain an operation is defined on."""


class BudgetError(DelayShareError):
    """A computation would exceed its configured size or attempt budget."""


class SchemaError(DelayShareError):
    """A project document violates the project-file schema."""

    def __init__(self, violations: Sequence[str]):
        self.violations: List[str] = list(violations)
        super().__init__("; ".join(self.violations) or "invalid project file")


class ParseError(DelayShareError):
    """A project document could not be parsed at all."""


class IoError(DelayShareError, OSError):
    """Writing an output artifact failed."""
