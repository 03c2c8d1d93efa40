"""Exception hierarchy shared by all modules.

The CLI maps these onto process exit codes, so library code should raise
the most specific class that applies.
"""


class TubeboundError(Exception):
    """Base class for every error raised by this package."""


class InputError(TubeboundError, ValueError):
    """Invalid arguments: wrong arity, dimension mismatch, bad ranges."""


class PolyParseError(InputError):
    """Syntax error in a polynomial system document."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class DegeneratePointError(TubeboundError):
    """The gradient matrix is rank deficient at a point of the variety."""

    def __init__(self, message, singular_values=None):
        super().__init__(message)
        self.singular_values = singular_values


class NumericError(TubeboundError, ArithmeticError):
    """Non-finite values or a numerical procedure that broke down."""


class TracingError(NumericError):
    """Curve continuation failed, e.g. a compact curve did not close."""


class UnsupportedError(TubeboundError, NotImplementedError):
    """The requested dimension or case is outside the supported set."""
