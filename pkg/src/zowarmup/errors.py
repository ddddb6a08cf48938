"""Exception hierarchy shared by every module."""


class ZOWarmUpError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(ZOWarmUpError, ValueError):
    """Invalid configuration, shape mismatch or bad argument."""

    def __init__(self, message, *, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class NumericError(ZOWarmUpError, ArithmeticError):
    """A loss, activation or weight vector became non-finite."""

    def __init__(self, message, *, round_index=None):
        self.round_index = round_index
        if round_index is not None:
            message = f"round {round_index}: {message}"
        super().__init__(message)


class ProtocolError(ZOWarmUpError, RuntimeError):
    """Violation of the federated exchange protocol (empty uploads, seed collisions)."""
