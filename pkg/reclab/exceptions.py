class DatasetParseError(ValueError):
    """A raw dataset line could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)


class SchemaError(ValueError):
    """A required column is missing from a CSV header."""


class ContextRequiredError(ValueError):
    """A context-aware algorithm was requested on a dataset without context."""


class TrainingError(ArithmeticError):
    """Training produced a non-finite factor entry."""

    def __init__(self, algorithm, epoch, message=None):
        self.algorithm = algorithm
        self.epoch = epoch
        super().__init__(message or f'{algorithm} diverged during epoch {epoch}')
