"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid dimensioning, impairment or hyperparameter settings."""


class FramingError(ValueError):
    """A bit block does not have the length the modem expects."""


class NumericError(ArithmeticError):
    """Non-finite values appeared where finite ones are required."""


class DatasetFormatError(ValueError):
    """A dataset, model or results file could not be parsed."""

    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.field = field


class TrainingError(RuntimeError):
    """Training diverged (non-finite loss)."""

    def __init__(self, message, epoch=None, batch=None):
        if epoch is not None:
            message = f"{message} at epoch {epoch}, batch {batch}"
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
