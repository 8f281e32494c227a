from typing import Optional


class DephasingError(Exception):
    """Base class for failures raised by the simulation library."""


class ConvergenceError(DephasingError):
    """Adaptive quadrature stopped before reaching the requested tolerance.

    Attributes:
        residual (float): Error estimate reported by the integrator when it gave up
    """

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (estimated residual {residual:.3e})")
        self.residual = residual


class NumericalError(DephasingError):
    """An eigen-solver or state check produced an unusable result."""

    def __init__(self, message: str, iterations: Optional[int] = None):
        if iterations is not None:
            message = f"{message} after {iterations} iterations"
        super().__init__(message)
        self.iterations = iterations


class IntegrationError(DephasingError):
    """The master-equation integrator became unstable.

    Attributes:
        time (float): Simulation time at which the instability was detected
    """

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} at t={time:.6g}")
        self.time = time


class UnsupportedError(DephasingError):
    """A closed form or limit was requested outside the hypothesis it needs."""


class ConfigError(ValueError):
    """Invalid user configuration, anchored to a line of the config file."""

    def __init__(self, message: str, line: Optional[int] = None, source: str = ""):
        self.line = line
        self.source = source
        prefix = source or "config"
        if line is not None:
            prefix = f"{prefix}:{line}"
        super().__init__(f"{prefix}: {message}")
