"""Exception hierarchy shared by all modules."""


class TSPositiveError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(TSPositiveError, ValueError):
    """Input data is structurally invalid (overlapping atoms, bad shapes)."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class DomainError(TSPositiveError, ValueError):
    """An argument lies outside the domain of the operation."""


class DataError(TSPositiveError, ValueError):
    """Sampled data is missing or insufficient for the requested quantity."""


class PreconditionError(TSPositiveError):
    """A standing assumption of the theory is violated (e.g. unbounded graininess)."""

    def __init__(self, message, assumption=None):
        super().__init__(message)
        self.assumption = assumption


class NumericalError(TSPositiveError, ArithmeticError):
    """A numerical procedure failed to converge or hit an ambiguous threshold.

    ``best`` carries the last iterate when one is available and
    ``candidates`` any competing values (e.g. two plausible ranks).
    """

    def __init__(self, message, best=None, candidates=None):
        super().__init__(message)
        self.best = best
        self.candidates = candidates


class ParseError(TSPositiveError, ValueError):
    """A system file could not be parsed."""

    def __init__(self, message, line=None, column=None, field=None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.column = column
        self.field = field


UNBOUNDED_GRAININESS = (
    "bounded graininess: the supremum of the forward graininess must be finite "
    "for uniform exponential stability to be possible"
)
