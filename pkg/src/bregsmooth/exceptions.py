"""Exception types raised across the package."""

import numpy as np

__all__ = [
    "DomainError",
    "InsufficientDataError",
    "SingularMatrixError",
    "CurvatureError",
    "FamilyMismatchError",
    "LeverageError",
]


class DomainError(ValueError):
    """An argument lies outside the domain of the function."""


class InsufficientDataError(ValueError):
    """Too few observations carry positive kernel weight at a fitting point."""


class SingularMatrixError(np.linalg.LinAlgError):
    """A local moment matrix could not be inverted."""


class CurvatureError(ValueError):
    """The divergence has no usable second derivative."""


class FamilyMismatchError(ValueError):
    """The operation is not defined for the requested response family."""


class LeverageError(ValueError):
    """A leverage value is too close to one for the leave-one-out correction."""
