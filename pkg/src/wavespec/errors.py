"""Exception hierarchy shared by all stages of the toolkit."""


class WavespecError(Exception):
    """Base class; carries an exit code used by the command line."""

    exit_code = 3


class ParameterError(WavespecError, ValueError):
    """Invalid physical or numerical parameter."""

    exit_code = 2


class ConfigError(WavespecError):
    exit_code = 2


class DegenerateDomainError(WavespecError, ValueError):
    """The free surface touches (or nearly touches) the flat bottom."""


class NumericalError(WavespecError, RuntimeError):
    """A numerical stage failed; ``details`` holds residuals or histories."""

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = dict(details or {})


class ConvergenceError(NumericalError):
    pass


class ValidationFailure(WavespecError):
    exit_code = 1
