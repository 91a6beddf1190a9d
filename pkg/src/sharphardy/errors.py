"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class PreconditionError(ValueError):
    """A documented precondition of an operation does not hold."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ConfigurationError(ValueError):
    """A run configuration cannot be resolved into a valid domain or grid."""

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column

    def __str__(self):
        msg = super().__str__()
        if self.line is not None:
            col = self.column if self.column is not None else 1
            return f"line {self.line}, column {col}: {msg}"
        return msg
