"""Partially linear models ``theta_i = a(U_i) + Z_i' beta``.

Bandwidth choice runs in two stages.  A root-n estimate of ``beta`` comes
from first differences of the data sorted by ``U`` (the smooth part nearly
cancels between neighbours).  The bandwidth is then chosen for the
univariate problem left after removing ``Z beta``.  A final profile
iteration refits ``a`` and ``beta`` at the chosen bandwidth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import SingularMatrixError
from .family import get_family
from .locfit import Dataset, LocalFitConfig, LocalFitResult, fit_curve
from .loocv import BandwidthSelection, GridSpec, select_bandwidth

__all__ = ["PLDataset", "SemiparResult", "difference_estimator", "profile_fit", "two_stage_select"]


@dataclass(frozen=True, eq=False)
class PLDataset:
    """Observations ``(U_i, Z_i, Y_i)`` sorted by ``U``; ``Z`` may have zero columns."""

    u: np.ndarray
    Z: np.ndarray
    y: np.ndarray
    support: tuple | None = None

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        Z = np.asarray(self.Z, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, None] if Z.size else np.zeros((u.size, 0))
        if Z.shape[0] != u.size or y.size != u.size:
            raise ValueError("u, Z and y have inconsistent dimensions")
        if u.size <= Z.shape[1] + 1:
            raise ValueError("need n > q + 1 observations")
        if np.any(np.diff(u) < 0):
            raise ValueError("u must be sorted ascending")
        support = (float(u[0]), float(u[-1])) if self.support is None else tuple(map(float, self.support))
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "support", support)

    @classmethod
    def from_unsorted(cls, u, Z, y, support=None):
        u = np.asarray(u, dtype=float)
        o = np.argsort(u, kind="stable")
        Z = np.asarray(Z, dtype=float)
        return cls(u[o], Z[o] if Z.size else np.zeros((u.size, 0)), np.asarray(y, dtype=float)[o], support)

    @property
    def n(self) -> int:
        return self.u.size

    @property
    def q(self) -> int:
        return self.Z.shape[1]


def _working_response(family, y):
    """Response on the linear-predictor scale used for differencing."""
    if family.kind == "gaussian":
        return y
    if family.kind == "poisson":
        return np.log(y + 0.5)
    p = (y + 0.5) / 2.0
    return np.log(p) - np.log1p(-p)


def difference_estimator(data: PLDataset, family="gaussian") -> np.ndarray:
    """Least squares of ``Y_i - Y_{i-1}`` on ``Z_i - Z_{i-1}`` (no intercept).

    For non-Gaussian families the responses are first mapped to the
    working scale (``log(y + .5)`` or the logit of ``(y + .5)/2``).
    """
    family = get_family(family)
    if data.q == 0:
        return np.zeros(0)
    dz = np.diff(data.Z, axis=0)
    dy = np.diff(_working_response(family, data.y))
    if np.linalg.matrix_rank(dz) < data.q:
        raise SingularMatrixError("differenced Z matrix is rank deficient")
    beta, *_ = np.linalg.lstsq(dz, dy, rcond=None)
    return beta


def profile_fit(data: PLDataset, beta, h: float, family="gaussian",
                config: LocalFitConfig | None = None) -> LocalFitResult:
    """Local fit of the smooth part with ``Z beta`` held fixed.

    Gaussian: the partial residuals ``Y - Z beta`` are smoothed.  Other
    families: ``Z beta`` enters as an offset of the local likelihood.
    ``theta_hat`` of the result is ``a_hat`` at the observations.
    """
    family = get_family(family)
    cfg = (config or LocalFitConfig(bandwidth=h)).with_bandwidth(h)
    lin = data.Z @ np.asarray(beta, dtype=float) if data.q else np.zeros(data.n)
    if family.kind == "gaussian":
        return fit_curve(Dataset(data.u, data.y - lin, data.support), family, cfg, with_diagnostics=False)
    return fit_curve(Dataset(data.u, data.y, data.support), family, cfg, with_diagnostics=False, offset=lin)


def _glm_offset(Z, y, offset, family, beta, iters=100, tol=1e-10):
    """Canonical-link IRLS for ``beta`` with a fixed offset and no intercept."""
    for _ in range(iters):
        th = family.clamp(offset + Z @ beta)
        w = family.variance(th)
        step = np.linalg.solve((Z.T * w) @ Z, Z.T @ (y - family.mean(th)))
        beta = beta + step
        if np.max(np.abs(step)) < tol:
            break
    return beta


@dataclass(frozen=True, eq=False)
class SemiparResult:
    """Outcome of the two-stage procedure.

    ``beta_h0`` is the difference estimate, ``beta_hat`` the profile
    estimate at ``h_hat`` and ``a_hat`` the smooth part at the observed
    ``U``.  ``rss`` records the residual sum of squares after each half
    step of the Gaussian profile iteration.
    """

    h_hat: float
    beta_h0: np.ndarray
    beta_hat: np.ndarray
    a_hat: np.ndarray
    selection: BandwidthSelection
    rounds: int
    converged: bool
    rss: list = field(default_factory=list)
    experimental: bool = False

    def __iter__(self):
        return iter((self.h_hat, self.beta_hat, self.a_hat))


def two_stage_select(data: PLDataset, family="gaussian", div="deviance", grid_spec: GridSpec | None = None,
                     config: LocalFitConfig | None = None, criterion: str = "ecv",
                     tolerance: float = 1e-8, max_rounds: int = 50, threads=None) -> SemiparResult:
    """Difference estimate, bandwidth selection, then profile refit.

    The profile step alternates a local fit of ``a`` with a (weighted)
    least-squares update of ``beta`` until ``beta`` moves less than
    ``tolerance``; ``converged`` is false after ``max_rounds`` rounds.
    Non-Gaussian families are marked ``experimental``.
    """
    family = get_family(family)
    family.check_response(data.y)
    beta0 = difference_estimator(data, family)
    lin0 = data.Z @ beta0 if data.q else np.zeros(data.n)
    base = Dataset(data.u, data.y - lin0 if family.kind == "gaussian" else data.y, data.support)
    sel = select_bandwidth(base, family, div, criterion, grid_spec, config,
                           offset=None if family.kind == "gaussian" else lin0, threads=threads)
    h = sel.selected_h

    beta = beta0.copy()
    rss, converged, rounds = [], data.q == 0, 0
    fit = profile_fit(data, beta, h, family, config)
    for rounds in range(1, max_rounds + 1):
        if data.q == 0:
            break
        a_hat = fit.theta_hat
        if family.kind == "gaussian":
            rss.append(float(np.sum((data.y - data.Z @ beta - a_hat) ** 2)))
            new, *_ = np.linalg.lstsq(data.Z, data.y - a_hat, rcond=None)
            rss.append(float(np.sum((data.y - data.Z @ new - a_hat) ** 2)))
        else:
            new = _glm_offset(data.Z, data.y, a_hat, family, beta)
        delta = float(np.max(np.abs(new - beta)))
        beta = new
        fit = profile_fit(data, beta, h, family, config)
        if delta < tolerance:
            converged = True
            break
    if not math.isfinite(float(np.sum(fit.theta_hat))):
        raise SingularMatrixError("profile fit failed at some observations")
    return SemiparResult(h, beta0, beta, fit.theta_hat.copy(), sel, rounds if data.q else 0, converged, rss,
                         experimental=family.kind != "gaussian")
