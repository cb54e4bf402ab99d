"""Exception types shared across the package."""


class GreywaveError(Exception):
    """Base class for all package errors."""


class SchemaError(GreywaveError):
    """A file or document is missing required structure (e.g. a column)."""


class DataError(GreywaveError):
    """Data content is invalid (non-finite values, bad rows)."""


class GridError(GreywaveError):
    """A time grid is not uniform or otherwise unusable."""


class BoundsError(GreywaveError):
    """A size/index request exceeds what the data can provide."""


class ConfigError(GreywaveError):
    """A configuration document or object is invalid."""


class ShapeError(GreywaveError):
    """Array dimensions do not line up."""


class NumericalError(GreywaveError):
    """A numerical routine failed (conditioning, singularity)."""


class DomainError(GreywaveError):
    """An input lies outside the mathematical domain of an operation."""


class DegeneracyError(GreywaveError):
    """A geometric construction is degenerate (e.g. all points coincide)."""
