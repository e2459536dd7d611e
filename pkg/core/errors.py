"""
Exception hierarchy shared by the computational modules.
"""


class ModpressError(Exception):
    """Base class for every error raised by the library."""


class DomainError(ModpressError, ValueError):
    """Input outside the mathematical domain of an operation."""


class OracleScaleExceeded(ModpressError):
    """An enumeration would exceed the configured cap."""


class DegenerateTruncation(ModpressError):
    """A truncation has no recurrent (irreducible) part."""


class TailNotCertifiable(ModpressError):
    """No certified bound is available for a series tail."""


class UnbracketedRoot(ModpressError):
    """Root search could not bracket the infimum inside the scanned t-range."""

    def __init__(self, message: str, scanned: tuple):
        super().__init__(message)
        self.scanned = scanned


class UndecidableCrossing(ModpressError):
    """A boundary-crossing decision fell inside the rounding slop."""


class ConditionInapplicable(ModpressError):
    """A criterion was requested for a specification that does not meet its hypotheses."""


class DepthMismatch(ModpressError):
    """A potential's depth does not fit the measure's word length."""
