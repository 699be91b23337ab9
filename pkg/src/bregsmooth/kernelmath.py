"""Kernels, kernel moments and the equivalent kernel of local polynomial fitting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import SingularMatrixError
from .quadrature import adaptive_simpson

__all__ = [
    "Kernel",
    "EPANECHNIKOV",
    "get_kernel",
    "moment",
    "moment_matrix",
    "equivalent_kernel",
    "equivalent_kernel_at_zero",
    "cp_constant",
]

_QUAD_TOL = 1e-10


@dataclass(frozen=True)
class Kernel:
    """A symmetric kernel supported on ``[-1, 1]``.

    ``kind`` is one of ``"epanechnikov"``, ``"uniform"``, ``"triangular"``.
    """

    kind: str = "epanechnikov"

    def __post_init__(self):
        if self.kind not in ("epanechnikov", "uniform", "triangular"):
            raise ValueError(f"unsupported kernel {self.kind!r}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        a = np.abs(t)
        if self.kind == "epanechnikov":
            v = 0.75 * (1.0 - t * t)
        elif self.kind == "uniform":
            v = np.full_like(t, 0.5)
        else:
            v = 1.0 - a
        return np.where(a <= 1.0, v, 0.0)

    def scaled(self, u, h: float):
        """``K_h(u) = K(u/h)/h``."""
        return self(np.asarray(u, dtype=float) / h) / h

    @property
    def at_zero(self) -> float:
        return float(self(0.0))


EPANECHNIKOV = Kernel("epanechnikov")


def get_kernel(kernel) -> Kernel:
    if isinstance(kernel, Kernel):
        return kernel
    return Kernel(str(kernel).lower())


def moment(kernel, k: int) -> float:
    """``mu_k = int t^k K(t) dt`` in closed form."""
    kernel = get_kernel(kernel)
    if k < 0 or int(k) != k:
        raise ValueError("moment order must be a non-negative integer")
    if k % 2:
        return 0.0
    if kernel.kind == "epanechnikov":
        return 0.75 * (2.0 / (k + 1) - 2.0 / (k + 3))
    if kernel.kind == "uniform":
        return 1.0 / (k + 1)
    return 2.0 * (1.0 / (k + 1) - 1.0 / (k + 2))


def moment_matrix(kernel, p: int) -> np.ndarray:
    """``S = (mu_{i+j})_{0 <= i, j <= p}``."""
    return np.array([[moment(kernel, i + j) for j in range(p + 1)] for i in range(p + 1)])


@lru_cache(maxsize=None)
def _first_row_inverse(kernel: Kernel, p: int) -> tuple:
    S = moment_matrix(kernel, p)
    if np.linalg.cond(S) > 1e12:
        raise SingularMatrixError(f"moment matrix for p={p} is singular")
    e1 = np.zeros(p + 1)
    e1[0] = 1.0
    return tuple(np.linalg.solve(S, e1))


def equivalent_kernel(kernel, p: int, t):
    """First element of ``S^{-1} (1, t, ..., t^p) K(t)``."""
    kernel = get_kernel(kernel)
    c = np.array(_first_row_inverse(kernel, int(p)))
    t = np.asarray(t, dtype=float)
    return np.polynomial.polynomial.polyval(t, c) * kernel(t)


def equivalent_kernel_at_zero(kernel, p: int) -> float:
    kernel = get_kernel(kernel)
    if p < 0 or p > 3:
        raise ValueError("supported degrees are 0..3")
    return _first_row_inverse(kernel, int(p))[0] * kernel.at_zero


def _integrate_sym(f, tol=_QUAD_TOL):
    # split at 0: the triangular kernel has a kink there
    return adaptive_simpson(f, -1.0, 0.0, tol / 2) + adaptive_simpson(f, 0.0, 1.0, tol / 2)


@lru_cache(maxsize=None)
def _cp_constant(kernel: Kernel, p: int, tol: float) -> float:
    def ek(t):
        return float(equivalent_kernel(kernel, p, t))

    r = _integrate_sym(lambda t: ek(t) ** 2, tol)
    mu = _integrate_sym(lambda t: t ** (p + 1) * ek(t), tol)
    fact = math.factorial(p + 1)
    return (fact**2 * r / (2 * (p + 1) * mu**2)) ** (1.0 / (2 * p + 3))


def cp_constant(kernel, p: int, tol: float = _QUAD_TOL) -> float:
    """Optimal-bandwidth constant ``C_p(K)`` for odd ``p``.

    ``C_p(K) = [((p+1)!)^2 R / (2 (p+1) mu^2)]^{1/(2p+3)}`` with
    ``R = int Keq^2`` and ``mu = int t^{p+1} Keq``.  For ``p = 1`` this is
    ``(int K^2 / mu_2^2)^{1/5}``.
    """
    if p % 2 == 0:
        raise ValueError("C_p(K) is defined for odd degrees only")
    return _cp_constant(get_kernel(kernel), int(p), float(tol))
