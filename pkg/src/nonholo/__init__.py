"""Nonholonomic frame geometry, off-diagonal Einstein metrics and curve-flow hierarchies."""
from . import connection, einstein, expr, manifold, soliton
from .errors import (BlowUpError, DegeneracyError, NonholoError, NonZeroMeanError, QuadratureError,
                     SingularMatrixError, StabilityError)

__version__ = "0.1.0"

__all__ = [
    "connection", "einstein", "expr", "manifold", "soliton", "NonholoError", "SingularMatrixError",
    "NonZeroMeanError", "QuadratureError", "DegeneracyError", "StabilityError", "BlowUpError",
]
