"""Exception hierarchy.

Validation errors signal bad inputs (CLI exit code 2); numerical errors
signal a stage that ran but could not produce a trustworthy answer (exit
code 3).
"""


class QFTraceError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(QFTraceError, ValueError):
    pass


class NumericalError(QFTraceError, ArithmeticError):
    pass


# mobius
class PoleAt(NumericalError):
    pass


class NotApplicable(ValidationError):
    pass


# groups
class NotLoxodromic(NumericalError):
    pass


class Capacity(NumericalError):
    pass


class InsufficientData(NumericalError):
    pass


class FiniteRank(InsufficientData):
    """Singular values vanish beyond a small rank; no decay exponent exists."""

    def __init__(self, rank, message=None):
        self.rank = rank
        super().__init__(message or f"finite-rank spectrum (rank {rank})")


class InfinityInLimitSet(ValidationError):
    pass


# boundary
class TooFew(ValidationError):
    pass


class InsufficientScales(ValidationError):
    pass


# conformal
class FitDiverged(NumericalError):
    pass


class OutsideDomain(ValidationError):
    pass


# quantized
class CutoffTooLarge(ValidationError):
    pass


class NonHermitian(NumericalError):
    pass


class PoleOnCurve(NumericalError):
    pass


# measures
class BasePointTooClose(ValidationError):
    pass


class DegenerateDenominator(NumericalError):
    pass


# doi
class QuadratureUnconverged(NumericalError):
    pass
