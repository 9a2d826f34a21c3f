"""Exception hierarchy for negdep.

Every error raised on bad input derives from :class:`NegDepError`, which the CLI
maps to exit code 2.
"""


class NegDepError(Exception):
    """Base class for all library errors."""


class InvalidLaw(NegDepError, ValueError):
    pass


class NonNormalizable(InvalidLaw):
    pass


class InconsistentDimension(InvalidLaw):
    pass


class EmptyCoordinateSet(NegDepError, ValueError):
    pass


class IndexOutOfRange(NegDepError, IndexError):
    pass


class DimensionTooLarge(NegDepError, ValueError):
    pass


class WrongDimension(NegDepError, ValueError):
    pass


class NegativeCoefficient(NegDepError, ValueError):
    pass


class BudgetExhausted(NegDepError, RuntimeError):
    pass


class NotPSD(NegDepError, ValueError):
    pass


class AsymmetricCov(NegDepError, ValueError):
    pass


class FactorizationFailure(NegDepError, ValueError):
    pass


class OutOfRange(NegDepError, ValueError):
    pass


class ClosedFormUnavailable(NegDepError, ValueError):
    pass


class PrecisionUnreachable(NegDepError, RuntimeError):
    pass


class InconsistentNesting(NegDepError, ValueError):
    pass


class PositiveOffDiagonal(NegDepError, ValueError):
    pass


class OverlappingRanges(NegDepError, ValueError):
    pass


class NotToeplitz(NegDepError, ValueError):
    pass


class DimensionMismatch(NegDepError, ValueError):
    pass


class Disconnected(NegDepError, ValueError):
    pass


class UnknownFixture(NegDepError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""
