"""Exception hierarchy shared by the library, the CLI and the HTTP service."""


class LeverageError(Exception):
    """Base class for every error raised by this project."""


class ModelInputError(LeverageError, ValueError):
    """Invalid argument, or a value outside the model's domain."""


class DataValidationError(ModelInputError):
    """An input file does not match its schema.

    Carries the offending path and, when known, the 1-based line number and
    column name so the CLI can point at the exact cell.
    """

    def __init__(self, message, path=None, line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        location = []
        if path is not None:
            location.append(str(path))
        if line is not None:
            location.append(f"line {line}")
        if column is not None:
            location.append(f"column '{column}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")


class ConvergenceError(LeverageError, RuntimeError):
    """An iterative scheme or root bracket failed."""


class NumericalError(LeverageError, FloatingPointError):
    """A formula or transform produced a non-finite value."""
