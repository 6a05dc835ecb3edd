"""Exception types shared across the package."""


class MatchingError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(MatchingError):
    """An argument violates a structural precondition (shape, dtype, range)."""


class DegenerateGeometryError(MatchingError):
    """A geometric construction is undefined for the given point set."""


class NotPsdError(MatchingError):
    """A matrix expected to be positive semi-definite has a genuinely negative eigenvalue."""


class EnumerationSizeError(MatchingError):
    """An exhaustive enumeration was requested for a problem above the size bound."""
