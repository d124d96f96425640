"""Exception and warning types raised by the solver."""

from __future__ import annotations


class BosekinError(Exception):
    """Base class for all package errors."""


class InputError(BosekinError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateDirectionError(InputError):
    """A direction is undefined because two velocities coincide."""


class GridMismatchError(InputError):
    """Two states live on different velocity grids."""


class NonConvergenceError(BosekinError, RuntimeError):
    """Picard iteration ran out of its iteration budget."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class ContractionViolationError(BosekinError, RuntimeError):
    """Successive Picard residuals grew instead of shrinking."""

    def __init__(self, message: str, ratio: float):
        super().__init__(message)
        self.ratio = ratio


class NaNDetectedError(BosekinError, RuntimeError):
    """A state became non-finite during time marching."""

    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = state


class TruncationWarning(UserWarning):
    """Mass was lost because part of a state left the velocity box."""
