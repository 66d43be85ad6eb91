"""Exception hierarchy.

Errors split into two families so the CLI can map them to exit codes:
``InputError`` (bad arguments, malformed specs) and ``NumericError``
(a computation that could not reach its contract).
"""


class MinPeriodError(Exception):
    exit_code = 3


class InputError(MinPeriodError, ValueError):
    exit_code = 2


class NumericError(MinPeriodError, ArithmeticError):
    exit_code = 3


# norms
class MalformedNorm(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class NonSquare(InputError):
    pass


class DimensionTooSmall(InputError):
    pass


# spectral
class DimensionTooLarge(InputError):
    pass


class RootSolverDiverged(NumericError):
    pass


class ZeroEigenvalue(InputError):
    pass


class NormNotComplexHomogeneous(InputError):
    pass


# systems
class NonpositiveL(InputError):
    pass


class MissingL(InputError):
    pass


# odesim
class StepTooLarge(InputError):
    pass


class NonfiniteState(NumericError):
    pass


class NoPeriodFound(NumericError):
    pass


class ConstantSolution(NumericError):
    pass


class NotApplicable(InputError):
    pass


# verify
class HorizonTooShort(InputError):
    pass


class ComponentOutOfRange(InputError):
    pass


class EmptyDifference(NumericError):
    pass


class OddGridCount(InputError):
    pass


class ZeroDenominator(NumericError):
    pass


class DegenerateBox(InputError):
    pass


class OptimizerStall(UserWarning):
    """No multistart restart improved on its initial iterate."""
