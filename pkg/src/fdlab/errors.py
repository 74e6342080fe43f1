class FdlError(Exception):
    """Base class for numerical failures raised by fdlab."""


class SingularSystem(FdlError):
    pass


class RangeViolation(FdlError):
    pass


class NoConvergence(FdlError):
    def __init__(self, message: str, iterations: int = 0):
        super().__init__(message)
        self.iterations = iterations


class DegenerateState(FdlError):
    pass


class SizeExceeded(FdlError):
    pass


class ThresholdNotExceeded(FdlError):
    pass


class ConfigError(Exception):
    """Invalid experiment configuration; the message names the field."""
