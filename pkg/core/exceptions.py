class MtcpertError(Exception):
    """Base class for every error raised by mtcpert."""


class DomainError(MtcpertError, ValueError):
    """A precondition on the inputs of an operation does not hold."""


class ConfigError(DomainError):
    """The run configuration failed schema validation.

    Each error is a ``(dotted_key, message)`` pair so the offending key can be reported.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{key}: {message}" for key, message in self.errors))


class NumericError(MtcpertError, ArithmeticError):
    """A numerical procedure failed (non-finite result, step underflow, quadrature failure)."""
