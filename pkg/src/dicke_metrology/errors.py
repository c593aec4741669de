"""Exception types raised across the package."""


class DickeMetrologyError(Exception):
    """Base class for computational errors (CLI exit code 1)."""


class DimensionError(DickeMetrologyError, ValueError):
    """Requested Hilbert space exceeds the dense-matrix resource guard."""


class BasisMismatch(DickeMetrologyError, ValueError):
    """State and operator live on different systems or bases."""


class EigensolverError(DickeMetrologyError):
    """Eigendecomposition failed or did not meet its residual contract."""


class DegenerateMoments(DickeMetrologyError, ValueError):
    """Moments for which the sensitivity formula has a vanishing denominator."""


class AngleSingularity(DickeMetrologyError, ValueError):
    """Rotation angle where sin(theta) cos(theta) vanishes."""


class UnphysicalMoments(DickeMetrologyError, ValueError):
    """Moments that no quantum state can produce (e.g. negative variances)."""


class EvenSymmetryViolation(DickeMetrologyError, ValueError):
    """Odd-in-theta moment terms are nonzero, so the even-symmetric formula does not apply."""


class TooFewValidResamples(DickeMetrologyError):
    """More than half of the bootstrap resamples had to be discarded."""


class MomentsFileError(DickeMetrologyError, ValueError):
    """Malformed measured-moments file."""

    def __init__(self, message: str, lineno: int | None = None, path: str | None = None):
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if lineno is not None:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}" if where else message)


class DepthCaveatWarning(UserWarning):
    """The depth threshold gain > k is only exact when k divides N or k << N."""
