"""Exception and warning classes raised by geonoise."""

import numpy as np


class GeonoiseError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(GeonoiseError, ValueError):
    """A parameter lies outside the domain on which an operation is defined."""


class EmptyRequestError(DomainError):
    """A length or count of zero was requested."""


class SingularityError(DomainError):
    """A spectral density diverges at the requested frequency."""


class FactorizationError(GeonoiseError, np.linalg.LinAlgError):
    """A matrix factorization failed.

    Parameters
    ----------
    message : str
        Human readable description.
    pivot : int, optional
        Zero-based index of the first failing pivot.
    """

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class ConditioningError(FactorizationError):
    """A system is numerically singular or too ill-conditioned to solve."""


class SpecificationError(GeonoiseError, ValueError):
    """A model specification is inconsistent or invalid."""


class UnderdeterminedError(SpecificationError):
    """Fewer observations than parameters."""


class CollinearityError(SpecificationError):
    """Design matrix columns are linearly dependent.

    Parameters
    ----------
    message : str
        Human readable description.
    columns : list of str
        Labels of the columns taking part in the dependency.
    """

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = list(columns)


class ObjectiveError(GeonoiseError, FloatingPointError):
    """The objective function returned a non-finite value."""


class TimeSeriesFormatError(GeonoiseError, ValueError):
    """A time-series file violates the text format.

    Parameters
    ----------
    message : str
        Human readable description.
    lineno : int, optional
        One-based line number of the offending line.
    """

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class ParseError(TimeSeriesFormatError):
    """A data line could not be parsed."""


class OrderingError(TimeSeriesFormatError):
    """Epochs are not strictly increasing."""


class ConvergenceWarning(UserWarning):
    """An iterative method stopped before meeting its tolerance."""
