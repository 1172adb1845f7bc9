"""Exception types shared across the package."""

from __future__ import annotations


class AkJointError(Exception):
    """Base class for all package errors."""


class ConfigError(AkJointError, ValueError):
    """Invalid run configuration or detector parameters (CLI exit code 2)."""


class PreconditionError(AkJointError, ValueError):
    """An operation was called outside its documented domain."""


class NumericalError(AkJointError, RuntimeError):
    """A numerical routine failed to reach its accuracy target (CLI exit code 3)."""


class KernelBuildError(NumericalError):
    def __init__(self, message: str, defect: float):
        super().__init__(f"{message} (achieved defect {defect:.3e})")
        self.defect = defect


class ConvergenceError(NumericalError):
    def __init__(self, message: str, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate
