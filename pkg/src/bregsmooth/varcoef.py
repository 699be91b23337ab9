"""Generalized varying-coefficient models.

The canonical parameter is ``theta(u, x) = x' A(u)`` with smooth
coefficient functions ``A = (a_1, ..., a_d)``.  Near ``u`` each ``a_l`` is
a degree-``p`` polynomial, so observation ``j`` has design row
``u_j(u) (x) X_j`` with ``u_j(u) = (1, U_j - u, ..., (U_j - u)^p)``.  The
coefficient vector is ordered in blocks ``(A, A', ..., A^{(p)}/p!)``.

:class:`VCFitResult` exposes the same attributes as
:class:`~bregsmooth.locfit.LocalFitResult` that the criteria in
:mod:`bregsmooth.loocv` read, so those apply unchanged.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _engine, loocv
from .exceptions import DomainError, InsufficientDataError, SingularMatrixError
from .family import ExponentialFamily, get_family
from .kernelmath import equivalent_kernel_at_zero, get_kernel
from .locfit import LocalFitConfig, _scale, _to_raw, _window

__all__ = [
    "VCDataset",
    "VCFitResult",
    "fit_vc",
    "fit_vc_loo",
    "hat_diagonal_vc",
    "s_diagonal_vc",
    "empirical_df_vc",
    "err_criteria_vc",
    "select_bandwidth_vc",
]


@dataclass(frozen=True, eq=False)
class VCDataset:
    """Observations ``(U_i, X_i, Y_i)`` sorted by ``U``."""

    u: np.ndarray
    X: np.ndarray
    y: np.ndarray
    support: tuple | None = None
    theta_true: np.ndarray | None = None

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).ravel()
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != u.size or y.size != u.size:
            raise ValueError("u, X and y have inconsistent dimensions")
        if u.size < 2:
            raise ValueError("need at least two observations")
        if np.any(np.diff(u) < 0):
            raise ValueError("u must be sorted ascending (use VCDataset.from_unsorted)")
        support = (float(u[0]), float(u[-1])) if self.support is None else tuple(map(float, self.support))
        if support[0] > u[0] or support[1] < u[-1] or support[1] <= support[0]:
            raise ValueError("support must contain every u")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "support", support)
        if self.theta_true is not None:
            object.__setattr__(self, "theta_true", np.asarray(self.theta_true, dtype=float))

    @classmethod
    def from_unsorted(cls, u, X, y, support=None, theta_true=None):
        u = np.asarray(u, dtype=float)
        o = np.argsort(u, kind="stable")
        tt = None if theta_true is None else np.asarray(theta_true)[o]
        return cls(u[o], np.asarray(X, dtype=float)[o], np.asarray(y, dtype=float)[o], support, tt)

    @property
    def n(self) -> int:
        return self.u.size

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def x(self) -> np.ndarray:
        # the smoothing variable, under the name the univariate code uses
        return self.u

    @property
    def support_length(self) -> float:
        return self.support[1] - self.support[0]


@dataclass(frozen=True, eq=False)
class VCFitResult:
    """Varying-coefficient fit.

    ``beta`` has shape ``(m, d (p+1))`` in raw ``(U - u)^k`` units;
    ``A_hat`` is its first block.  ``obs_*``, ``H`` (``H_i*``) and
    ``S_diag`` (``S_i*``) refer to the observations.  ``se`` holds sandwich
    standard errors of ``A_hat`` when requested.
    """

    eval_points: np.ndarray
    beta: np.ndarray
    A_hat: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    boundary_flag: np.ndarray
    failed: np.ndarray
    y: np.ndarray
    family: ExponentialFamily
    config: LocalFitConfig
    n: int
    d: int
    support_length: float
    obs_theta: np.ndarray | None = None
    obs_mean: np.ndarray | None = None
    H: np.ndarray | None = None
    S_diag: np.ndarray | None = None
    se: np.ndarray | None = None
    flags: dict = field(default_factory=dict)

    @property
    def h(self) -> float:
        return self.config.bandwidth

    @property
    def degree(self) -> int:
        return self.config.degree

    @property
    def theta_hat(self):
        return self.obs_theta

    @property
    def m_hat(self):
        return self.obs_mean

    @property
    def H_star(self):
        return self.H

    @property
    def S_star(self):
        return self.S_diag

    @property
    def variance_obs(self) -> np.ndarray:
        return self.family.variance(self.family.clamp(self.obs_theta))


def _vc_design(data: VCDataset, points, config, s):
    P, kw, idx = _window(data.u, points, config, s)
    Xw = data.X[idx]                                    # (m, W, d)
    D = (P[..., :, None] * Xw[..., None, :]).reshape(P.shape[0], P.shape[1], -1)
    return D, kw, idx


def _raw(beta, s, d):
    m, kd = beta.shape
    return _to_raw(beta.reshape(m, kd // d, d).transpose(0, 2, 1), s).transpose(0, 2, 1).reshape(m, kd)


def _lead_rows(data, rows, k):
    g = np.zeros((len(rows), k * data.d))
    g[:, : data.d] = data.X[rows]
    return g


def _initial_vc(data, family, kw, yw, kd):
    """Intercept-type start: the first covariate column carries the link of the local mean."""
    sw = kw.sum(axis=1)
    ybar = (np.sum(kw * yw, axis=1) + data.y.mean()) / (1.0 + sw)
    if family.kind == "bernoulli":
        ybar = np.clip(ybar, 0.01, 0.99)
    elif family.kind == "poisson":
        ybar = np.maximum(ybar, 1e-3)
    init = np.zeros((kw.shape[0], kd))
    x1 = data.X[:, 0]
    if np.allclose(x1, x1[0]) and x1[0] != 0:
        init[:, 0] = family.link(ybar) / x1[0]
    return init


def _solve_vc(data, family, config, points, *, obs_rows=None, loo=None, offset=None, threads=None,
              record_history=False):
    points = np.asarray(points, dtype=float)
    k = config.degree + 1
    kd = k * data.d
    s = _scale(data, config.bandwidth)
    opts = config.solver_options(record_history)
    width = int(np.max(_engine.window_index(data.u, points, config.bandwidth)[1].sum(axis=1))) if points.size else 1

    def run(sl):
        D, kw, idx = _vc_design(data, points[sl], config, s)
        if loo is not None:
            kw = np.where(idx == loo[sl][:, None], 0.0, kw)
        yw = data.y[idx]
        off = None if offset is None else np.asarray(offset, dtype=float)[idx]
        guard = None if obs_rows is None else _lead_rows(data, obs_rows[sl], k)
        return _engine.solve_batch(D, kw, yw, family, opts, init=_initial_vc(data, family, kw, yw, kd),
                                   offset=off, guard_rows=guard)

    parts = _engine.map_ordered(run, _engine.chunk_slices(points.size, max(width, 1), kd), threads)
    res = parts[0] if record_history else _engine.concat_results(parts)
    return res, s


def _sandwich_se(data, family, config, points, beta_scaled, s, status):
    """``sqrt(diag(a Sn^{-1} (X'K^2 W X) Sn^{-1}))`` for the ``A`` block."""
    D, kw, idx = _vc_design(data, points, config, s)
    th = family.clamp(np.matmul(D, np.nan_to_num(beta_scaled)[:, :, None])[:, :, 0])
    w = family.variance(th)
    sn = _engine._ridged(_engine._gram(D, kw * w), config.ridge)
    inv, ok = _engine._safe_inv(sn)
    mid = _engine._gram(D, kw * kw * w)
    cov = family.dispersion * np.matmul(np.matmul(inv, mid), inv)
    se = np.sqrt(np.maximum(np.diagonal(cov, axis1=1, axis2=2)[:, : data.d], 0.0))
    se[~ok | (status != _engine.OK)] = np.nan
    return se


def s_diagonals_vc(data: VCDataset, config: LocalFitConfig, threads=None) -> np.ndarray:
    """``S_i* = (e1 (x) X_i)' {X*' K X*}^{-1} (e1 (x) X_i) K_h(0)`` for every ``i``."""
    k = config.degree + 1
    s = _scale(data, config.bandwidth)
    kh0 = config.kernel.at_zero / config.bandwidth

    def run(sl):
        D, kw, _ = _vc_design(data, data.u[sl], config, s)
        inv, _ = _engine._safe_inv(_engine._ridged(_engine._gram(D, kw), config.ridge))
        g = _lead_rows(data, np.arange(data.n)[sl], k)
        return np.einsum("mk,mkl,ml->m", g, inv, g) * kh0

    return np.concatenate(_engine.map_ordered(run, _engine.chunk_slices(data.n, data.n, k * data.d), threads))


def fit_vc(data: VCDataset, family, config: LocalFitConfig, eval_points=None,
           with_diagnostics: bool = True, standard_errors: bool = False, threads=None,
           offset=None) -> VCFitResult:
    """Local likelihood fit of the coefficient functions.

    With the default ``eval_points`` (the observed ``U_i``) the fitted
    ``theta_i = X_i' A_hat(U_i)``, the leverages ``H_i*`` and (with
    ``with_diagnostics``) the diagonals ``S_i*`` are attached.
    """
    family = get_family(family)
    family.check_response(data.y)
    k = config.degree + 1
    at_obs = eval_points is None
    points = data.u if at_obs else np.asarray(eval_points, dtype=float).ravel()
    if not at_obs and (points.min() < data.support[0] - 1e-12 or points.max() > data.support[1] + 1e-12):
        raise DomainError("evaluation points must lie within the support")
    rows = np.arange(data.n) if at_obs else None
    res, s = _solve_vc(data, family, config, points, obs_rows=rows, offset=offset, threads=threads)
    if np.all(res.status != _engine.OK):
        if res.status[0] == _engine.INSUFFICIENT:
            raise InsufficientDataError("too few observations with positive weight at every point")
        raise SingularMatrixError("local moment matrix singular at every point")
    if res.clamped.any():
        warnings.warn("theta clamped to +/-30 during local fitting", RuntimeWarning, stacklevel=2)
    beta = _raw(res.beta, s, data.d)
    failed = res.status != _engine.OK
    flags = {
        "n_failed": int(failed.sum()),
        "n_boundary": int(res.boundary.sum()),
        "clamped": bool(res.clamped.any()),
        "max_iterations": config.iteration_cap,
    }
    extra = {}
    if standard_errors:
        extra["se"] = _sandwich_se(data, family, config, points, res.beta, s, res.status)
    if at_obs:
        theta = np.einsum("nd,nd->n", data.X, beta[:, : data.d])
        if offset is not None:
            theta = theta + np.asarray(offset, dtype=float)
        ok = ~failed
        g = _lead_rows(data, rows, k)
        H = np.einsum("mk,mkl,ml->m", g, res.sn_inv, g) * config.kernel.at_zero / config.bandwidth
        H = np.where(ok, H * family.variance(family.clamp(np.nan_to_num(theta))), np.nan)
        extra.update(
            obs_theta=theta,
            obs_mean=np.where(ok, family.mean(family.clamp(np.nan_to_num(theta))), np.nan),
            H=H,
            S_diag=s_diagonals_vc(data, config, threads) if with_diagnostics else None,
        )
    return VCFitResult(
        eval_points=points, beta=beta, A_hat=beta[:, : data.d], iterations=res.iterations,
        converged=res.converged, boundary_flag=res.boundary, failed=failed, y=data.y,
        family=family, config=config, n=data.n, d=data.d, support_length=data.support_length,
        flags=flags, **extra,
    )


def fit_vc_loo(data: VCDataset, family, config: LocalFitConfig, threads=None):
    """Honest deleted fits ``(theta_i^{-i}, m_i^{-i}, ok)`` at every observation."""
    family = get_family(family)
    family.check_response(data.y)
    rows = np.arange(data.n)
    res, s = _solve_vc(data, family, config, data.u, obs_rows=rows, loo=rows, threads=threads)
    ok = res.status == _engine.OK
    beta = _raw(res.beta, s, data.d)
    theta = np.einsum("nd,nd->n", data.X, beta[:, : data.d])
    return theta, np.where(ok, family.mean(family.clamp(np.nan_to_num(theta))), np.nan), ok


def hat_diagonal_vc(data: VCDataset, family, config: LocalFitConfig, fit: VCFitResult, i: int) -> float:
    """``H_i*`` of observation ``i`` from a fit at the observations."""
    if fit.H is None:
        raise ValueError("fit carries no leverages; fit at the observations")
    hi = float(fit.H[i])
    if not np.isfinite(hi):
        raise SingularMatrixError(f"no converged fit at observation {i}")
    return hi


def s_diagonal_vc(data: VCDataset, config: LocalFitConfig, i: int) -> float:
    k = config.degree + 1
    s = _scale(data, config.bandwidth)
    D, kw, _ = _vc_design(data, data.u[i : i + 1], config, s)
    if np.count_nonzero(kw > 0) < 1:
        raise InsufficientDataError(f"no observations with positive weight at u={data.u[i]}")
    inv, ok = _engine._safe_inv(_engine._ridged(_engine._gram(D, kw), config.ridge))
    if not ok[0]:
        raise SingularMatrixError(f"X*'KX* is singular at observation {i}")
    g = _lead_rows(data, [i], k)[0]
    return float(g @ inv[0] @ g * config.kernel.at_zero / config.bandwidth)


def empirical_df_vc(p: int, n: int, d: int, h: float, kernel, support_length: float,
                    constants: loocv.DFConstants) -> float:
    """``d {(p + 1 - a) + C n/(n - d) K0 |Omega_U| / h}``."""
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    if n <= d:
        raise ValueError("need n > d")
    k0 = equivalent_kernel_at_zero(get_kernel(kernel), p)
    return d * ((p + 1 - constants.a) + constants.C * n / (n - d) * k0 * support_length / h)


def err_criteria_vc(fit: VCFitResult, div, mode: str = "acv", constants=None, constants_s=None):
    """ACV, ECV, hybrid or hybrid-ECV for a varying-coefficient fit."""
    mode = loocv.normalize_criterion(mode)
    if mode == "acv":
        return loocv.err_acv(fit, div)
    if mode == "acv_lb":
        return loocv.err_acv(fit, div, "lb")
    if mode == "hybrid":
        return loocv.err_hybrid(fit, div)
    p, n, d, h, L = fit.degree, fit.n, fit.d, fit.h, fit.support_length
    kern = fit.config.kernel
    ch = constants or loocv.default_df_constants(fit.family, p, "H")
    hbar = empirical_df_vc(p, n, d, h, kern, L, ch) / n
    if mode == "ecv":
        return loocv.ecv_from_average(fit, div, hbar)
    if mode == "hybrid_ecv":
        cs = constants_s or loocv.default_df_constants(fit.family, p, "S")
        return loocv.hybrid_ecv_from_average(fit, div, hbar, empirical_df_vc(p, n, d, h, kern, L, cs) / n)
    raise ValueError(f"criterion {mode!r} is not available through err_criteria_vc")


def err_cv_exact_vc(data: VCDataset, family, div, config: LocalFitConfig, threads=None):
    family = get_family(family)
    div = loocv._bind(div, family)
    _, m_loo, ok = fit_vc_loo(data, family, config, threads)
    terms, _, nclip = loocv._losses(div, data.y, np.where(ok, m_loo, np.nan))
    value, excluded = loocv._reduce(terms, data.n)
    return loocv.PredictionErrorEstimate("cv_exact", value, div.token, config.bandwidth, terms,
                                         {"n_failed": excluded, "n_clipped": nclip})


def select_bandwidth_vc(data: VCDataset, family, div, criterion: str = "ecv",
                        grid_spec: loocv.GridSpec | None = None, config: LocalFitConfig | None = None,
                        constants=None, threads=None) -> loocv.BandwidthSelection:
    """Grid search of a criterion for the varying-coefficient model (``h0`` from the ``U`` spacings)."""
    family = get_family(family)
    div = loocv._bind(div, family)
    criterion = loocv.normalize_criterion(criterion)
    loocv._check_criterion(criterion, family, div)
    family.check_response(data.y)
    grid, rule = (grid_spec or loocv.GridSpec()).resolve(data.u, data.support_length)
    template = config or LocalFitConfig(bandwidth=float(grid[0]))

    def one(h):
        cfg = template.with_bandwidth(h)
        try:
            if criterion == "cv_exact":
                est = err_cv_exact_vc(data, family, div, cfg, threads=1)
            else:
                needs_s = criterion in ("hybrid", "acv_lb")
                fit = fit_vc(data, family, cfg, with_diagnostics=needs_s, threads=1)
                est = err_criteria_vc(fit, div, criterion, constants)
            return est.value, est.flags
        except (InsufficientDataError, SingularMatrixError) as exc:
            return math.inf, {"error": type(exc).__name__}

    out = _engine.map_ordered(one, grid, threads)
    values = np.array([v for v, _ in out], dtype=float)
    if not np.isfinite(values).any():
        raise InsufficientDataError("criterion is infinite at every bandwidth")
    idx = int(np.argmin(np.where(np.isnan(values), np.inf, values)))
    return loocv.BandwidthSelection(grid, values, float(grid[idx]), idx, criterion, div.token, rule,
                                    {"n_infinite": int(np.sum(~np.isfinite(values))),
                                     "per_h": [f for _, f in out]})

