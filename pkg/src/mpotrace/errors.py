"""Exception types shared across the package."""


class MpoTraceError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(MpoTraceError, ValueError):
    """Index extents or chain lengths of the operands do not match."""


class NumericError(MpoTraceError, ArithmeticError):
    """Non-finite data or a numerically invalid operation."""


class CapacityError(MpoTraceError, ValueError):
    """A size guard was exceeded (dense reconstruction, oracle dimension)."""


class HermiticityError(MpoTraceError, ValueError):
    """An operator that must be Hermitian measurably is not."""


class EvaluationError(MpoTraceError, ArithmeticError):
    """A spectral function evaluated to a non-finite value at some node."""
