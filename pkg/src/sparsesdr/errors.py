"""Exception types shared across the package."""


class SparseSdrError(Exception):
    """Base class for all package errors."""


class ParseError(SparseSdrError):
    """Malformed input file (bad cell, ragged row, ...)."""


class ValidationError(SparseSdrError):
    """Inputs violate a documented precondition."""


class NumericError(SparseSdrError):
    """Numerical failure (singular covariance, degenerate pairing, ...)."""
