"""
Errors Module

This module defines the exceptions raised across the ginzburg_lod package.
"""
from typing import Optional, Sequence


class ConfigError(ValueError):
    """Invalid experiment configuration or command-line arguments."""


class SpaceMismatchError(ValueError):
    """A field was passed to an operation defined on a different discrete space."""


class PhaseAlignmentError(ValueError):
    """The overlap between a state and its reference vanishes, so no phase can be chosen."""


class FieldFileError(ValueError):
    """A field file has a bad magic number, version or payload length."""


class SolverError(RuntimeError):
    """
    A linear or nonlinear solver failed.

    Attributes:
        label (str): Name of the system that failed (e.g. the patch)
        residual (Optional[float]): Residual attained when the failure was detected
    """

    def __init__(self, message: str, label: str = "", residual: Optional[float] = None):
        super().__init__(message)
        self.label = label
        self.residual = residual


class LineSearchError(SolverError):
    """The backtracking step underflowed while a decrease was still predicted."""

    def __init__(self, message: str, trace: Sequence[float], residual: Optional[float] = None):
        super().__init__(message, label="line search", residual=residual)
        self.trace = list(trace)
