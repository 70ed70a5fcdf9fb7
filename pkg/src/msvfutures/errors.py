"""Exception hierarchy shared by the pricing, calibration and simulation modules."""

from __future__ import annotations


class MSVError(Exception):
    """Base class for every error raised by this package."""


class DomainError(MSVError, ValueError):
    """Input outside the mathematical domain of an operation."""


class NumericError(MSVError, ArithmeticError):
    """An iterative or quadrature routine failed to converge.

    ``best`` carries the best iterate found, when there is one.
    """

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class ExpansionBreakdownError(MSVError):
    """First-order implied vol is not positive: parameters lie outside the asymptotic regime."""


class CalibrationError(MSVError):
    """A calibration stage could not produce a usable estimate."""


class CollinearityError(CalibrationError):
    """Stage-2 design matrix is singular (columns not separately identifiable)."""


class ParseError(MSVError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyPanelError(MSVError, ValueError):
    """No usable smile survived filtering."""
