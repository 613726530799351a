"""Exception types shared across the package."""


class FolioError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatchError(FolioError, ValueError):
    """An input array does not match the problem dimensions.

    The message names the offending axis (asset, factor, period,
    exposure row, ...) so it can be reported directly.
    """

    def __init__(self, axis, expected, got):
        self.axis = axis
        self.expected = expected
        self.got = got
        super().__init__(f"axis '{axis}': expected length {expected}, got {got}")


class ValidationError(FolioError, ValueError):
    """A constructor invariant or precondition was violated."""


class DegenerateFactorError(FolioError, ValueError):
    """The factor-return matrix is rank deficient."""

    def __init__(self, factor_index, message):
        self.factor_index = factor_index
        super().__init__(message)


class ParseError(FolioError, ValueError):
    """A serialized file could not be parsed."""


class SchemaVersionError(FolioError, ValueError):
    """A serialized file carries an unsupported schema version."""


class GridDimensionError(FolioError, ValueError):
    """Exhaustive grid verification refused: decision dimension too large."""
