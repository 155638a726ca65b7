"""Exception hierarchy shared by every module."""


class OGTError(Exception):
    """Base class for errors raised by opgauge."""


class DimensionMismatchError(OGTError, ValueError):
    pass


class ConditioningError(OGTError, ArithmeticError):
    """Raised when a matrix is too ill-conditioned to invert safely."""


class RangeError(OGTError, OverflowError):
    """Raised when an exponential overflows."""


class CapabilityError(OGTError):
    """Raised when a requested derivative order is beyond what the engine supports."""


class CouplingError(OGTError, ZeroDivisionError):
    """Raised when an operation divides by a vanishing coupling."""


class ScenarioError(OGTError, ValueError):
    """Malformed or inconsistent scenario input."""


class PeriodicityError(ScenarioError):
    """A field used on a periodic lattice is not periodic on the box."""
