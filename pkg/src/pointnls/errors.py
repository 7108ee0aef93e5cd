"""Exception hierarchy.

Two families matter to callers (and to the CLI exit codes): parameter
validation problems and numerical failures.
"""


class PointNLSError(Exception):
    """Base class for all package errors."""


class ValidationError(PointNLSError, ValueError):
    """Inputs violate a documented precondition."""


class NumericalError(PointNLSError, ArithmeticError):
    """A numerical procedure failed to deliver a result."""


class DomainMismatch(ValidationError):
    pass


class OutOfExistenceWindow(ValidationError):
    pass


class IncompatibleSubspace(ValidationError):
    pass


class WindowBoundaryTooClose(ValidationError):
    pass


class InconsistentInputs(ValidationError):
    pass


class MatchingFailed(NumericalError):
    pass


class FactorizationBreakdown(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class NoBracket(NumericalError):
    pass


class SolverBreakdown(NumericalError):
    pass


class BlowupDetected(NumericalError):
    """Amplitude exceeded the blow-up threshold during time evolution."""
