"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    """An input violated a documented precondition."""


class TrainingDivergedError(RuntimeError):
    """A training run produced a non-finite loss."""

    def __init__(self, message, step=None, member=None):
        super().__init__(message)
        self.step = step
        self.member = member


class ParseError(ValueError):
    """A CSV or parameter file could not be read.

    ``line`` is the 1-based line number of the offending row, or ``None``
    when the problem is not tied to a single line.
    """

    def __init__(self, message, line=None, path=None):
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.line = line
        self.path = path
