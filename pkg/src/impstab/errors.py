"""Exception hierarchy."""


class ImpstabError(Exception):
    """Base class for all errors raised by impstab."""


class EmptyPolynomial(ImpstabError, ValueError):
    pass


class PoleHit(ImpstabError, ZeroDivisionError):
    pass


class DivideByZeroFunction(ImpstabError, ZeroDivisionError):
    pass


class DimensionMismatch(ImpstabError, ValueError):
    pass


class AlgebraicLoop(ImpstabError):
    pass


class SingularMatrixFunction(ImpstabError):
    pass


class NonSquare(DimensionMismatch):
    pass


class ZeroMatrix(ImpstabError):
    pass


class SingularEliminationBlock(SingularMatrixFunction):
    pass


class OpenLoopUnstable(ImpstabError):
    pass


class OriginPass(ImpstabError):
    """The locus comes closer to the encirclement point than the guard."""


class UnresolvedWinding(ImpstabError):
    """The summed phase is not close enough to a whole number of turns."""


class BranchTrackingFailure(ImpstabError):
    pass


class NonUniformGrid(ImpstabError, ValueError):
    pass


class SymmetryViolation(ImpstabError):
    pass


class OperatingPointInfeasible(ImpstabError, ValueError):
    pass


class PortNotAvailable(ImpstabError, ValueError):
    pass


class ConfigError(ImpstabError, ValueError):
    pass


class SchemaError(ImpstabError, ValueError):
    pass
