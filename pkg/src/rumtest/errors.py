"""Exception hierarchy for rumtest."""

from __future__ import annotations


class RumTestError(Exception):
    """Base class for all library errors."""


class InputError(RumTestError):
    """Malformed user input (files, shapes, values)."""


class DegenerateBudgets(InputError):
    """Two periods have proportional price vectors."""

    def __init__(self, t: int, j: int):
        super().__init__(f"periods {t} and {j} have proportional price vectors")
        self.periods = (t, j)


class InfeasibleMargin(RumTestError):
    """The requested margin removes every patch of some period."""


class OnBoundary(RumTestError):
    """A bundle lies (within tolerance) on a budget-comparison hyperplane."""

    def __init__(self, t: int, j: int, gap: float):
        super().__init__(
            f"bundle in period {t} is on the boundary with period {j} (gap={gap:.3g})"
        )
        self.period = t
        self.other = j
        self.gap = gap


class UnknownPatch(RumTestError):
    """A bundle's sign vector was not among the enumerated patches."""


class TooLarge(RumTestError):
    """Brute-force enumeration would exceed the configured limit."""


class Exhausted(RumTestError):
    """Sampling did not find the requested number of distinct rational types."""

    def __init__(self, message: str, found: list | None = None):
        super().__init__(message)
        self.found = found or []


class NumericalFailure(RumTestError):
    """Singular normal equations in the master solver."""


class ContractViolation(RumTestError):
    """An operation was called outside its documented preconditions."""


class TimedOut(RumTestError):
    """A time limit was hit; ``best`` carries the best-so-far result."""

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class IterationLimit(RumTestError):
    """Column generation hit its iteration cap."""

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best
