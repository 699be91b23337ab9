"""Local polynomial likelihood fitting for a scalar covariate.

At a point ``x`` the coefficients ``beta(x) = (beta_0, ..., beta_p)``
maximise the kernel-weighted log-likelihood of the local polynomial
``theta(X_j) ~ sum_k beta_k (X_j - x)^k``; ``theta_hat(x) = beta_0``.

Internally the polynomial basis is scaled by ``s = min(h, range(X))``,
i.e. ``((X_j - x)/s)^k``, which keeps the moment matrices well
conditioned for small bandwidths.  Returned coefficients are always in
the raw ``(X_j - x)^k`` basis.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import _engine
from .exceptions import (
    DomainError,
    FamilyMismatchError,
    InsufficientDataError,
    SingularMatrixError,
)
from .family import ExponentialFamily, get_family
from .kernelmath import EPANECHNIKOV, Kernel, get_kernel

__all__ = [
    "Dataset",
    "LocalFitConfig",
    "LocalFitResult",
    "fit_at",
    "local_loglik",
    "lb_step",
    "hat_diagonal",
    "s_diagonal",
    "s_diagonals",
    "fit_curve",
    "fit_loo",
]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observations ``(x_i, y_i)`` sorted by ``x``.

    ``support`` defaults to the observed range.  ``theta_true`` optionally
    carries the canonical parameter at each ``x_i`` (simulated data).
    """

    x: np.ndarray
    y: np.ndarray
    support: tuple | None = None
    theta_true: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        if x.shape != y.shape:
            raise ValueError("x and y must have the same length")
        if x.size < 2:
            raise ValueError("need at least two observations")
        if np.any(np.diff(x) < 0):
            raise ValueError("x must be sorted ascending (use Dataset.from_unsorted)")
        support = (float(x[0]), float(x[-1])) if self.support is None else tuple(map(float, self.support))
        if support[0] > x[0] or support[1] < x[-1] or support[1] <= support[0]:
            raise ValueError("support must contain every x")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "support", support)
        if self.theta_true is not None:
            object.__setattr__(self, "theta_true", np.asarray(self.theta_true, dtype=float))

    @classmethod
    def from_unsorted(cls, x, y, support=None, theta_true=None):
        x = np.asarray(x, dtype=float)
        order = np.argsort(x, kind="stable")
        tt = None if theta_true is None else np.asarray(theta_true)[order]
        return cls(x[order], np.asarray(y, dtype=float)[order], support, tt)

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def support_length(self) -> float:
        return self.support[1] - self.support[0]

    def drop(self, i: int) -> "Dataset":
        keep = np.arange(self.n) != i
        tt = None if self.theta_true is None else self.theta_true[keep]
        return Dataset(self.x[keep], self.y[keep], self.support, tt)


@dataclass(frozen=True)
class LocalFitConfig:
    """Settings of a local likelihood fit.

    ``ridge`` is relative: ``ridge * trace(M)/(p+1)`` is added to the
    diagonal of each local moment matrix ``M`` (in the scaled basis).
    ``max_iterations=None`` means 100 for Newton-Raphson and 500 for the
    lower-bound iteration.
    """

    bandwidth: float
    degree: int = 1
    kernel: Kernel = EPANECHNIKOV
    algorithm: str = "newton_raphson"
    max_iterations: int | None = None
    tolerance: float = 1e-8
    ridge: float = 1e-8
    grad_tolerance: float = 1e-10
    step_halving: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kernel", get_kernel(self.kernel))
        if not (self.bandwidth > 0 and np.isfinite(self.bandwidth)):
            raise ValueError("bandwidth must be positive and finite")
        if self.degree < 0 or int(self.degree) != self.degree:
            raise ValueError("degree must be a non-negative integer")
        if self.algorithm not in ("newton_raphson", "lower_bound"):
            raise ValueError("algorithm must be 'newton_raphson' or 'lower_bound'")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.ridge < 0:
            raise ValueError("ridge must be non-negative")

    @property
    def iteration_cap(self) -> int:
        if self.max_iterations is not None:
            return int(self.max_iterations)
        return 500 if self.algorithm == "lower_bound" else 100

    def with_bandwidth(self, h: float) -> "LocalFitConfig":
        return replace(self, bandwidth=float(h))

    def solver_options(self, record_history=False) -> _engine.SolverOptions:
        return _engine.SolverOptions(
            algorithm=self.algorithm,
            max_iterations=self.iteration_cap,
            tolerance=self.tolerance,
            grad_tolerance=self.grad_tolerance,
            ridge=self.ridge,
            step_halving=self.step_halving,
            record_history=record_history,
        )


@dataclass(frozen=True, eq=False)
class LocalFitResult:
    """Fitted local polynomial at a set of evaluation points.

    The ``obs_*`` arrays hold the fit at the observations themselves, which
    is what the leave-one-out machinery needs; when ``eval_points`` are the
    observations they coincide with ``beta``/``theta_hat``/``m_hat``.
    """

    eval_points: np.ndarray
    beta: np.ndarray
    theta_hat: np.ndarray
    m_hat: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    boundary_flag: np.ndarray
    failed: np.ndarray
    clamped: np.ndarray
    y: np.ndarray
    family: ExponentialFamily
    config: LocalFitConfig
    n: int
    support_length: float
    obs_beta: np.ndarray | None = None
    obs_theta: np.ndarray | None = None
    obs_mean: np.ndarray | None = None
    H: np.ndarray | None = None
    S_diag: np.ndarray | None = None
    flags: dict = field(default_factory=dict)

    @property
    def h(self) -> float:
        return self.config.bandwidth

    @property
    def degree(self) -> int:
        return self.config.degree

    @property
    def variance_obs(self) -> np.ndarray:
        """``b''(theta_hat_i)`` at the observations."""
        return self.family.variance(self.family.clamp(self.obs_theta))


# ---------------------------------------------------------------------------
# design construction


def _scale(dataset: Dataset, h: float) -> float:
    span = dataset.x[-1] - dataset.x[0]
    return float(min(h, span)) if span > 0 else float(h)


def _design(x, points, p, s):
    dx = (x[None, :] - np.asarray(points, dtype=float)[:, None]) / s
    return dx[..., None] ** np.arange(p + 1)


def _weights(x, points, config: LocalFitConfig):
    return config.kernel.scaled(x[None, :] - np.asarray(points, dtype=float)[:, None], config.bandwidth)


def _to_raw(beta_scaled, s):
    k = beta_scaled.shape[-1]
    return beta_scaled / s ** np.arange(k)


def _to_scaled(beta_raw, s):
    k = beta_raw.shape[-1]
    return beta_raw * s ** np.arange(k)


def _initial(dataset: Dataset, family: ExponentialFamily, kw, k, yw=None):
    """Intercept from the kernel-weighted mean shrunk to the global mean."""
    y = dataset.y
    sw = kw.sum(axis=1)
    local = kw @ y if yw is None else np.sum(kw * yw, axis=1)
    ybar = (local + y.mean()) / (1.0 + sw)
    if family.kind == "bernoulli":
        ybar = np.clip(ybar, 0.01, 0.99)
    elif family.kind == "poisson":
        ybar = np.maximum(ybar, 1e-3)
    init = np.zeros((kw.shape[0], k))
    init[:, 0] = family.link(ybar)
    return init


def _check_family_data(dataset, family):
    family = get_family(family)
    family.check_response(dataset.y)
    return family


def _window(x, points, config, s):
    """Windowed polynomial design ``D``, weights ``kw`` and observation indices."""
    idx, inside = _engine.window_index(x, points, config.bandwidth)
    dx = x[idx] - np.asarray(points, dtype=float)[:, None]
    kw = np.where(inside, config.kernel.scaled(dx, config.bandwidth), 0.0)
    D = np.cumprod(np.concatenate([np.ones(dx.shape + (1,)), np.repeat((dx / s)[..., None], config.degree, axis=2)], axis=2), axis=2)
    return D, kw, idx


def _solve(dataset, family, config, points, *, init=None, loo=None, offset=None,
           record_history=False, threads=None):
    """Fit at ``points``.  ``loo[r]`` is an observation index to drop at row ``r``."""
    points = np.asarray(points, dtype=float)
    k = config.degree + 1
    s = _scale(dataset, config.bandwidth)
    opts = config.solver_options(record_history)
    off_all = None if offset is None else np.asarray(offset, dtype=float)
    guard = np.zeros((1, k))
    guard[0, 0] = 1.0
    width = int(np.max(_engine.window_index(dataset.x, points, config.bandwidth)[1].sum(axis=1))) if points.size else 1

    def run(sl):
        D, kw, idx = _window(dataset.x, points[sl], config, s)
        if loo is not None:
            kw = np.where(idx == loo[sl][:, None], 0.0, kw)
        start = _initial(dataset, family, kw, k, dataset.y[idx]) if init is None else _to_scaled(init[sl], s)
        off = None if off_all is None else off_all[idx]
        return _engine.solve_batch(D, kw, dataset.y[idx], family, opts, init=start, offset=off,
                                   guard_rows=np.repeat(guard, D.shape[0], axis=0))

    parts = _engine.map_ordered(run, _engine.chunk_slices(points.size, max(width, 1), k), threads)
    res = _engine.concat_results(parts) if not record_history else parts[0]
    return res, s


def _raise_status(res, where):
    if res.status[0] == _engine.INSUFFICIENT:
        raise InsufficientDataError(f"fewer than p+1 observations with positive weight at {where}")
    if res.status[0] == _engine.SINGULAR:
        raise SingularMatrixError(f"local moment matrix is singular at {where}")


# ---------------------------------------------------------------------------
# single-point operations


def fit_at(dataset: Dataset, family, x: float, config: LocalFitConfig, init=None,
           record_history: bool = False, exclude: int | None = None):
    """Local MLE ``beta_hat(x)``.

    ``exclude`` is an observation index whose weight is set to zero,
    which is how leave-one-out refits are done.
    Returns ``(beta, diagnostics)``.  ``diagnostics`` holds ``iterations``,
    ``converged``, ``boundary``, ``clamped`` and ``loglik``; with
    ``record_history=True`` it also holds ``history``, a list of per-iterate
    dicts with the local log-likelihood, gradient (scaled basis) and, for
    the lower-bound algorithm, the guaranteed ascent ``-g' B^{-1} g / 2``.
    """
    family = _check_family_data(dataset, family)
    init_arr = None if init is None else np.asarray(init, dtype=float)[None, :]
    loo = None if exclude is None else np.array([int(exclude)])
    res, s = _solve(dataset, family, config, [x], init=init_arr, loo=loo, record_history=record_history)
    _raise_status(res, f"x={x}")
    beta = _to_raw(res.beta[0], s)
    diag = {
        "iterations": int(res.iterations[0]),
        "converged": bool(res.converged[0]),
        "boundary": bool(res.boundary[0]),
        "clamped": bool(res.clamped[0]),
        "loglik": float(res.loglik[0]),
        "algorithm": config.algorithm,
        "max_iterations": config.iteration_cap,
        "tolerance": config.tolerance,
    }
    if res.clamped[0]:
        warnings.warn("theta clamped to +/-30 during the local fit", RuntimeWarning, stacklevel=2)
    if record_history:
        diag["history"] = [
            {"loglik": float(h["loglik"][0]), "grad": h["grad"][0],
             "bound": None if h["bound"] is None else float(h["bound"][0]),
             "beta": _to_raw(h["beta"][0], s)}
            for h in res.history if h["index"].size
        ]
    return beta, diag


def local_loglik(dataset: Dataset, family, x: float, config: LocalFitConfig, beta) -> float:
    """Kernel-weighted local log-likelihood at ``beta`` (raw basis)."""
    family = get_family(family)
    D = _design(dataset.x, [x], config.degree, 1.0)[0]
    kw = _weights(dataset.x, [x], config)[0]
    th = family.clamp(D @ np.asarray(beta, dtype=float))
    return float(np.sum(kw * family.loglik(dataset.y, th)))


def lb_step(dataset: Dataset, x: float, config: LocalFitConfig, beta):
    """One lower-bound update ``beta - B^{-1} X'K r`` for local logistic fits.

    ``B = -X'KX/4`` (ridged) does not depend on ``beta``.
    """
    family = get_family("bernoulli")
    family.check_response(dataset.y)
    s = _scale(dataset, config.bandwidth)
    D = _design(dataset.x, [x], config.degree, s)
    kw = _weights(dataset.x, [x], config)
    if np.count_nonzero(kw > 0) < config.degree + 1:
        raise InsufficientDataError(f"fewer than p+1 observations with positive weight at x={x}")
    s0 = _engine._ridged(np.einsum("mnk,mn,mnl->mkl", D, kw, D), config.ridge)
    inv, ok = _engine._safe_inv(s0)
    if not ok[0]:
        raise SingularMatrixError(f"lower-bound matrix is singular at x={x}")
    g = _to_scaled(np.asarray(beta, dtype=float), s)
    th = family.clamp(D[0] @ g)
    grad = D[0].T @ (kw[0] * (dataset.y - family.mean(th)))
    return _to_raw(g + 4.0 * inv[0] @ grad, s)


def _leverage_from(res, s, config, family, rows_theta):
    """``H_i = e1' S_n^{-1} e1 K_h(0) b''(theta_i)`` for fits at the observations."""
    kh0 = config.kernel.at_zero / config.bandwidth
    e11 = res.sn_inv[:, 0, 0]
    return e11 * kh0 * family.variance(family.clamp(rows_theta))


def hat_diagonal(dataset: Dataset, family, config: LocalFitConfig, fit: LocalFitResult, i: int) -> float:
    """Leverage ``H_i`` of observation ``i`` using the fitted ``beta_hat(X_i)``."""
    family = get_family(family)
    if fit.obs_beta is None:
        raise ValueError("fit carries no coefficients at the observations")
    beta = fit.obs_beta[i]
    if not np.all(np.isfinite(beta)):
        raise SingularMatrixError(f"no converged fit at observation {i}")
    s = _scale(dataset, config.bandwidth)
    xi = dataset.x[i]
    D = _design(dataset.x, [xi], config.degree, s)[0]
    kw = _weights(dataset.x, [xi], config)[0]
    th = family.clamp(D @ _to_scaled(beta, s))
    sn = _engine._ridged((D.T * (kw * family.variance(th))) @ D[None], config.ridge)
    inv, ok = _engine._safe_inv(sn)
    if not ok[0]:
        raise SingularMatrixError(f"S_n is singular at observation {i}")
    kh0 = config.kernel.at_zero / config.bandwidth
    return float(inv[0, 0, 0] * kh0 * family.variance(family.clamp(beta[0])))


def s_diagonals(dataset: Dataset, config: LocalFitConfig, threads=None) -> np.ndarray:
    """``S_i = e1' (X'KX)^{-1} e1 K_h(0)`` for every observation (response-free)."""
    x = dataset.x
    k = config.degree + 1
    s = _scale(dataset, config.bandwidth)
    kh0 = config.kernel.at_zero / config.bandwidth

    def run(sl):
        D, kw, _ = _window(x, x[sl], config, s)
        s0 = _engine._ridged(_engine._gram(D, kw), config.ridge)
        inv, _ = _engine._safe_inv(s0)
        return inv[:, 0, 0] * kh0

    return np.concatenate(_engine.map_ordered(run, _engine.chunk_slices(x.size, x.size, k), threads))


def s_diagonal(dataset: Dataset, config: LocalFitConfig, i: int) -> float:
    x = dataset.x
    s = _scale(dataset, config.bandwidth)
    D = _design(x, [x[i]], config.degree, s)
    kw = _weights(x, [x[i]], config)
    if np.count_nonzero(kw > 0) < config.degree + 1:
        raise InsufficientDataError(f"fewer than p+1 observations with positive weight at x={x[i]}")
    s0 = _engine._ridged(np.einsum("mnk,mn,mnl->mkl", D, kw, D), config.ridge)
    inv, ok = _engine._safe_inv(s0)
    if not ok[0]:
        raise SingularMatrixError(f"X'KX is singular at observation {i}")
    return float(inv[0, 0, 0] * config.kernel.at_zero / config.bandwidth)


# ---------------------------------------------------------------------------
# curves


def _assemble(dataset, family, config, points, res, s, obs=None, obs_s=None, s_diag=None, offset=None):
    beta = _to_raw(res.beta, s)
    theta = beta[:, 0]
    failed = res.status != _engine.OK
    mean = np.where(failed, np.nan, family.mean(family.clamp(np.nan_to_num(theta))))
    flags = {
        "n_failed": int(failed.sum()),
        "n_boundary": int(res.boundary.sum()),
        "n_nonconverged": int((~res.converged & ~res.boundary & ~failed).sum()),
        "clamped": bool(res.clamped.any()),
        "max_iterations": config.iteration_cap,
    }
    kwargs = {}
    if obs is not None:
        obs_beta = _to_raw(obs.beta, obs_s)
        obs_theta = obs_beta[:, 0] if offset is None else obs_beta[:, 0] + np.asarray(offset, dtype=float)
        ok = obs.status == _engine.OK
        H = np.where(ok, _leverage_from(obs, obs_s, config, family, np.nan_to_num(obs_theta)), np.nan)
        kwargs = dict(obs_beta=obs_beta, obs_theta=obs_theta,
                      obs_mean=np.where(ok, family.mean(family.clamp(np.nan_to_num(obs_theta))), np.nan),
                      H=H, S_diag=s_diag)
        flags["n_failed_obs"] = int((~ok).sum())
    return LocalFitResult(
        eval_points=np.asarray(points, dtype=float), beta=beta, theta_hat=theta, m_hat=mean,
        iterations=res.iterations, converged=res.converged, boundary_flag=res.boundary,
        failed=failed, clamped=res.clamped, y=dataset.y, family=family, config=config,
        n=dataset.n, support_length=dataset.support_length, flags=flags, **kwargs,
    )


def fit_curve(dataset: Dataset, family, config: LocalFitConfig, eval_points=None,
              with_diagnostics: bool = True, threads=None, offset=None) -> LocalFitResult:
    """Fit the local polynomial at every evaluation point.

    ``eval_points`` defaults to the observations, in which case the
    leverages ``H`` come for free.  ``with_diagnostics`` additionally
    computes the lower-bound diagonals ``S_diag`` and, for other evaluation
    points, a second fit at the observations.  ``offset`` is a
    fixed per-observation addition to the linear predictor; ``theta_hat``
    then holds the smooth component only while ``obs_theta`` and
    ``obs_mean`` include the offset.

    Raises :class:`InsufficientDataError` or :class:`SingularMatrixError`
    only if every evaluation point fails.
    """
    family = _check_family_data(dataset, family)
    at_obs = eval_points is None
    points = dataset.x if at_obs else np.asarray(eval_points, dtype=float).ravel()
    if not at_obs and (points.min() < dataset.support[0] - 1e-12 or points.max() > dataset.support[1] + 1e-12):
        raise DomainError("evaluation points must lie within the support")
    res, s = _solve(dataset, family, config, points, offset=offset, threads=threads)
    if np.all(res.status != _engine.OK):
        _raise_status(res, "every evaluation point")
    if res.clamped.any():
        warnings.warn("theta clamped to +/-30 during local fitting", RuntimeWarning, stacklevel=2)
    if at_obs:
        sd = s_diagonals(dataset, config, threads) if with_diagnostics else None
        return _assemble(dataset, family, config, points, res, s, res, s, sd, offset)
    if not with_diagnostics:
        return _assemble(dataset, family, config, points, res, s)
    obs, obs_s = _solve(dataset, family, config, dataset.x, offset=offset, threads=threads)
    sd = s_diagonals(dataset, config, threads)
    return _assemble(dataset, family, config, points, res, s, obs, obs_s, sd, offset)


def fit_loo(dataset: Dataset, family, config: LocalFitConfig, threads=None, offset=None):
    """Leave-one-out refits: ``theta_hat_i^{-i}`` and ``m_hat_i^{-i}`` for every ``i``.

    Each row is an honest refit at ``X_i`` with observation ``i`` given zero
    weight.  Returns ``(theta_loo, m_loo, ok)``; failed refits are NaN.
    """
    family = _check_family_data(dataset, family)
    res, s = _solve(dataset, family, config, dataset.x, loo=np.arange(dataset.n),
                    offset=offset, threads=threads)
    ok = res.status == _engine.OK
    theta = _to_raw(res.beta, s)[:, 0]
    if offset is not None:
        theta = theta + np.asarray(offset, dtype=float)
    mean = np.where(ok, family.mean(family.clamp(np.nan_to_num(theta))), np.nan)
    return theta, mean, ok


def require_bernoulli(family):
    family = get_family(family)
    if family.kind != "bernoulli":
        raise FamilyMismatchError("operation defined for the Bernoulli family only")
    return family
