"""Exception types shared across the simulator."""


class BaeQndError(Exception):
    """Base class for all simulator errors."""


class InvalidDimensionError(BaeQndError, ValueError):
    """A Fock-space dimension is missing, too small, or inconsistent."""


class DimensionMismatchError(BaeQndError, ValueError):
    """Operands act on Fock spaces of different dimensions."""


class OutOfRangeError(BaeQndError, ValueError):
    """An index (photon number, wavefunction level) is outside the supported range."""


class InvalidParameterError(BaeQndError, ValueError):
    """A numeric parameter violates its documented precondition."""


class GridTooNarrowError(BaeQndError):
    """An integration grid does not cover enough of the outcome distribution."""


class DegenerateConditioningError(BaeQndError):
    """Conditioning on an outcome whose probability density underflows."""


class TruncationOverflowError(BaeQndError):
    """A state has accumulated non-negligible weight near the truncation edge."""


class SetupMismatchError(BaeQndError):
    """Calibration of the optical setup against the measurement kernel failed."""
