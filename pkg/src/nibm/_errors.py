"""Exception types shared across the package.

Every error raised on purpose by this package derives from :class:`NibmError`,
so callers can catch one base class.  The command line tool maps
:class:`InvalidArgumentError` (and bad configuration generally) to exit code 2
and the numerical-failure subclasses to exit code 3.
"""

from __future__ import annotations


class NibmError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(NibmError, ValueError):
    """An argument is outside the documented domain of an operation."""


class SingularMatrixError(NibmError):
    """A linear solve hit a pivot indistinguishable from zero.

    The index of the offending pivot is kept so callers can report which
    elimination step failed.
    """

    def __init__(self, pivot_index: int, message: str | None = None):
        self.pivot_index = pivot_index
        if message is None:
            message = f"singular matrix: no usable pivot at elimination step {pivot_index}"
        super().__init__(message)


class SeriesTooSlowError(NibmError):
    """A reflection series would need too many terms at the requested tolerance."""


class PrecisionWindowError(NibmError):
    """Requested evaluation point lies outside the supported precision window."""


class QuadratureError(NibmError):
    """A quadrature-based value failed its internal accuracy check."""


class SamplingError(NibmError):
    """A Monte Carlo sampler exceeded its retry or resource budget."""
