"""Exponential-family response models in canonical form.

A family is described by its cumulant function ``b``; the mean is
``b'(theta)`` and the variance is ``dispersion * b''(theta)``.  The
normalising term ``c(y, psi)`` of the density is never needed and is
omitted everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .exceptions import DomainError

__all__ = [
    "ExponentialFamily",
    "THETA_CLAMP",
    "cumulant",
    "canonical_link",
    "log_likelihood",
    "get_family",
]

FamilyKind = Literal["gaussian", "poisson", "bernoulli"]

#: Bound on |theta| for the exponential families (overflow guard).
THETA_CLAMP = 30.0

_KINDS = ("gaussian", "poisson", "bernoulli")


@dataclass(frozen=True)
class ExponentialFamily:
    """A canonical exponential family.

    Parameters
    ----------
    kind : {"gaussian", "poisson", "bernoulli"}
    dispersion : float
        The factor ``a(psi)``.  Must be 1 for Poisson and Bernoulli; the
        error variance for the Gaussian family.
    """

    kind: FamilyKind
    dispersion: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown family {self.kind!r}; expected one of {_KINDS}")
        if not np.isfinite(self.dispersion) or self.dispersion <= 0:
            raise ValueError("dispersion must be positive")
        if self.kind != "gaussian" and self.dispersion != 1.0:
            raise ValueError(f"{self.kind} family has fixed dispersion 1")

    @property
    def clamps(self) -> bool:
        return self.kind != "gaussian"

    def clamp(self, theta):
        """Clip ``theta`` to the overflow-safe range (no-op for Gaussian)."""
        if self.kind == "gaussian":
            return np.asarray(theta, dtype=float)
        return np.clip(theta, -THETA_CLAMP, THETA_CLAMP)

    # Vectorised kernels.  Callers are responsible for clamping.

    def b(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.kind == "gaussian":
            return 0.5 * theta**2
        if self.kind == "poisson":
            return np.exp(theta)
        return np.logaddexp(0.0, theta)

    def mean(self, theta):
        """``b'(theta)``."""
        theta = np.asarray(theta, dtype=float)
        if self.kind == "gaussian":
            return theta.copy()
        if self.kind == "poisson":
            return np.exp(theta)
        return 0.5 * (1.0 + np.tanh(0.5 * theta))

    def variance(self, theta):
        """``b''(theta)`` (variance function, without the dispersion)."""
        theta = np.asarray(theta, dtype=float)
        if self.kind == "gaussian":
            return np.ones_like(theta)
        if self.kind == "poisson":
            return np.exp(theta)
        m = 0.5 * (1.0 + np.tanh(0.5 * theta))
        return m * (1.0 - m)

    def link(self, m):
        """Canonical link ``g = (b')^{-1}``, no domain checks."""
        m = np.asarray(m, dtype=float)
        if self.kind == "gaussian":
            return m.copy()
        if self.kind == "poisson":
            return np.log(m)
        return np.log(m) - np.log1p(-m)

    def in_mean_space(self, m):
        m = np.asarray(m, dtype=float)
        if self.kind == "gaussian":
            return np.isfinite(m)
        if self.kind == "poisson":
            return np.isfinite(m) & (m > 0)
        return (m > 0) & (m < 1)

    def valid_response(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "gaussian":
            return np.isfinite(y)
        if self.kind == "poisson":
            return np.isfinite(y) & (y >= 0) & (y == np.floor(y))
        return (y == 0) | (y == 1)

    def check_response(self, y):
        y = np.asarray(y, dtype=float)
        if not np.all(self.valid_response(y)):
            raise DomainError(f"response values outside the {self.kind} support")
        return y

    def loglik(self, y, theta):
        """``{y theta - b(theta)} / a(psi)`` elementwise."""
        theta = np.asarray(theta, dtype=float)
        return (np.asarray(y, dtype=float) * theta - self.b(theta)) / self.dispersion


def get_family(family, dispersion: float = 1.0) -> ExponentialFamily:
    """Coerce a token or an :class:`ExponentialFamily` to a family."""
    if isinstance(family, ExponentialFamily):
        return family
    return ExponentialFamily(str(family).lower(), dispersion)


def _check_theta(family: ExponentialFamily, theta, clamp: bool):
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise DomainError("theta must be finite")
    if family.clamps:
        if clamp:
            theta = family.clamp(theta)
        elif np.any(np.abs(theta) > THETA_CLAMP):
            raise DomainError(f"|theta| exceeds {THETA_CLAMP} and clamping is disabled")
    return theta


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def cumulant(family, theta, clamp: bool = False):
    """Return ``(b, b', b'')`` at ``theta``.

    Examples
    --------
    >>> cumulant("poisson", 0.0)
    (1.0, 1.0, 1.0)
    """
    family = get_family(family)
    theta = _check_theta(family, theta, clamp)
    return _out(family.b(theta)), _out(family.mean(theta)), _out(family.variance(theta))


def canonical_link(family, m):
    """Return ``theta`` with ``b'(theta) = m``.

    Raises :class:`DomainError` for means on or outside the boundary of the
    mean space.
    """
    family = get_family(family)
    m = np.asarray(m, dtype=float)
    if not np.all(family.in_mean_space(m)):
        raise DomainError(f"mean outside the interior of the {family.kind} mean space")
    return _out(family.link(m))


def log_likelihood(family, y, theta, clamp: bool = False):
    """Log-likelihood ``{y theta - b(theta)}/a(psi)`` without ``c(y, psi)``."""
    family = get_family(family)
    y = family.check_response(y)
    theta = _check_theta(family, theta, clamp)
    return _out(family.loglik(y, theta))
