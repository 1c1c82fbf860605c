"""Exceptions raised by the estimation library.

Every error the library raises derives from :class:`FlmError` so the command
line front end can report it as a single line.
"""


class FlmError(Exception):
    """Base class for library errors."""

    kind = "error"


class SpecMismatchError(FlmError, ValueError):
    """Two elements or a coefficient and a dataset live in different spaces."""

    kind = "spec-mismatch"


class DegenerateDesignError(FlmError):
    """Every covariate block is identically zero, or no basis is available."""

    kind = "degenerate-design"


class NumericError(FlmError, ArithmeticError):
    """Iterates or residuals stopped being finite."""

    kind = "numeric"


class SelectionError(FlmError):
    """A tuning-parameter rule could not produce a value."""

    kind = "selection"


class ParameterError(FlmError, ValueError):
    """An argument is outside its admissible range."""

    kind = "parameter"


class DatasetParseError(FlmError, ValueError):
    """A dataset manifest or payload could not be read."""

    kind = "parse"

    def __init__(self, message, row=None, column=None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column!r}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.row = row
        self.column = column
