"""Exception types shared across the package."""


class GlcovError(Exception):
    """Base class for all errors raised by glcov."""


class ConformanceError(GlcovError):
    """Inputs have incompatible shapes, indices, or group structure."""


class DefinitenessError(GlcovError):
    """A matrix required to be positive definite is not."""


class NumericalError(GlcovError):
    """A solver produced non-finite values or diverged."""


class ConfigurationError(GlcovError):
    """A scenario, grid, or option set is invalid."""


class StabilityError(ConfigurationError):
    """A requested autoregressive process is not stationary."""


class InputError(GlcovError):
    """A user-supplied file could not be parsed."""

    def __init__(self, message, path=None, line=None, column=None):
        loc = ""
        if path is not None:
            loc += str(path)
        if line is not None:
            loc += f":{line}"
            if column is not None:
                loc += f":{column}"
        super().__init__(f"{loc}: {message}" if loc else message)
        self.path = path
        self.line = line
        self.column = column
