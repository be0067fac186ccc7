"""Exception hierarchy shared by every stage of the pipeline."""


class EdamrdError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(EdamrdError, ValueError):
    """A configuration or call parameter is outside its legal range."""


class InvalidInputError(EdamrdError, ValueError):
    """Input data violates an operation's preconditions."""


class DegenerateSignalError(EdamrdError, ValueError):
    """A normalisation constant collapsed to zero (e.g. a flat envelope)."""


class ConfigError(EdamrdError, ValueError):
    """Malformed configuration document (unknown keys, bad types)."""


class DataError(EdamrdError, ValueError):
    """Unreadable or malformed input file."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class FileError(EdamrdError, OSError):
    """Failure reading or writing an artifact on disk."""

    def __init__(self, message, path):
        self.path = path
        super().__init__(f"{path}: {message}")


class DivergenceError(EdamrdError, RuntimeError):
    """Training produced a non-finite loss."""
