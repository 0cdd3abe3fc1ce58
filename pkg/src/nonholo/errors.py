"""Exception types shared across modules."""
from __future__ import annotations


class NonholoError(Exception):
    """Base class for validation failures raised by this package."""


class SingularMatrixError(NonholoError):
    def __init__(self, what: str, point: dict | None = None, det: float | None = None):
        msg = f"{what} is singular"
        if det is not None:
            msg += f" (|det| = {abs(det):.3e})"
        if point is not None:
            msg += f" at {point}"
        super().__init__(msg)
        self.point = point
        self.det = det


class NonZeroMeanError(NonholoError):
    def __init__(self, component, mean: float):
        super().__init__(f"component {component} has nonzero mean {mean:.6e}; no periodic antiderivative")
        self.component = component
        self.mean = mean


class QuadratureError(NonholoError):
    def __init__(self, message: str, interval: tuple[float, float]):
        super().__init__(f"{message}; worst subinterval [{interval[0]!r}, {interval[1]!r}]")
        self.interval = interval


class DegeneracyError(NonholoError):
    """Generating data violates a non-degeneracy precondition (code names the condition)."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


class StabilityError(NonholoError):
    pass


class BlowUpError(NonholoError):
    def __init__(self, message: str, last_good):
        super().__init__(message)
        self.last_good = last_good
