"""Exception hierarchy. Each class maps onto one CLI exit code."""


class SlideGridError(Exception):
    exit_code = 3


class ConfigError(SlideGridError, ValueError):
    """Invalid parameters or inputs, detected before any computation."""

    exit_code = 2


class NumericalError(SlideGridError, ArithmeticError):
    exit_code = 3


class SchedulingError(SlideGridError):
    """A sampler update was asked to move to an equal or higher noise level."""

    exit_code = 3


class ContractViolation(SlideGridError):
    """A denoiser or plan broke the engine's contract (wrong output count, k > D)."""

    exit_code = 4


class ShapeError(ConfigError):
    pass
