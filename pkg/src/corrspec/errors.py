"""Exception hierarchy shared by every corrspec module."""


class CorrspecError(ValueError):
    """Base class; the CLI maps subclasses to exit code 3."""


class NegativeEntry(CorrspecError):
    pass


class SumNotOne(CorrspecError):
    pass


class ZeroMarginal(CorrspecError):
    pass


class ShapeMismatch(CorrspecError):
    pass


class SizeOverflow(CorrspecError):
    pass


class UnknownAxis(CorrspecError):
    pass


class ZeroEvent(CorrspecError):
    pass


class AlphabetMismatch(CorrspecError):
    pass


class InvalidTilde(CorrspecError):
    pass


class ConvergenceFailure(CorrspecError):
    pass


class SubsetExplosion(CorrspecError):
    pass


class CapExceeded(CorrspecError):
    pass


class DegenerateSource(CorrspecError):
    pass


class SingularScaling(CorrspecError):
    pass


class DegenerateMarginal(CorrspecError):
    pass


class NonIntegralCount(CorrspecError):
    pass


class NotBinary(CorrspecError):
    pass


class BudgetExceeded(CorrspecError):
    pass
