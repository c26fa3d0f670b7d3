"""Exception hierarchy shared across the package."""


class SvdtrError(Exception):
    """Base class for all package errors."""


class DataError(SvdtrError):
    """Invalid or inconsistent input data."""


class DimensionMismatch(DataError):
    pass


class InsufficientData(DataError):
    pass


class RankDeficient(SvdtrError):
    """Design matrix has numerical column rank below its column count."""

    def __init__(self, rank, ncols, ratio=None):
        self.rank = rank
        self.ncols = ncols
        self.ratio = ratio
        msg = f"design has numerical rank {rank} < {ncols} columns"
        if ratio is not None:
            msg += f" (min/max singular value ratio {ratio:.3g})"
        super().__init__(msg)


class NumericalFailure(SvdtrError):
    """LP kernel failed to terminate or produced an invalid witness."""

    def __init__(self, message, partial_assignment=None):
        super().__init__(message)
        self.partial_assignment = partial_assignment


class BudgetExceeded(SvdtrError):
    def __init__(self, cap, found):
        self.cap = cap
        self.found = found
        super().__init__(f"labeling count exceeded cap {cap} (found at least {found})")


class ParseError(DataError):
    def __init__(self, path, line, column, message):
        self.path = path
        self.line = line
        self.column = column
        super().__init__(f"{path}:{line}: column {column!r}: {message}")


class BindingError(DataError):
    """A configured column name is absent from the input header."""


class ConfigError(SvdtrError):
    pass
