"""Exception hierarchy.

Everything raised deliberately by the library derives from one of two roots so
the CLI can map failures to exit codes: ``ValidationError`` (bad input, exit 2)
and ``NumericalError`` (a computation broke down, exit 3).
"""


class MobiusOTError(Exception):
    """Base class for all library errors."""

    stage = None


class ValidationError(MobiusOTError, ValueError):
    pass


class NumericalError(MobiusOTError, ArithmeticError):
    pass


class MeshParseError(ValidationError):
    pass


class IndexOutOfRangeError(MeshParseError):
    pass


class NotDiskTypeError(ValidationError):
    pass


class DegenerateFaceError(ValidationError):
    pass


class InfeasibleProblemError(ValidationError):
    pass


class SingularSystemError(NumericalError):
    pass


class IntegrationMismatchError(NumericalError):
    pass


class BranchError(NumericalError):
    pass


class CollapsedFaceError(NumericalError):
    pass


class RankDeficientError(NumericalError):
    pass


class NonIntegralPlanError(NumericalError):
    pass
