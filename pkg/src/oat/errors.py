"""Exception hierarchy; the CLI maps each class to an exit code."""


class OatError(Exception):
    """Base class for library errors."""

    exit_code = 70


class ParseError(OatError, ValueError):
    """Malformed JSON input."""

    exit_code = 65


class PreconditionError(OatError, ValueError):
    """An input violates a documented precondition."""

    exit_code = 66


class DimensionError(PreconditionError):
    """Shapes of matrices or subspaces do not match."""


class ConsistencyError(OatError, RuntimeError):
    """Two routes that must agree did not; this is a bug, not a verdict."""

    exit_code = 70
