"""Leave-one-out prediction error and bandwidth selection.

Every approximate criterion here has the form

    Err = sum_i [ Q(Y_i, m_i) + q''(m_i) (Y_i - m_i)^2 {1 - (1 + c_i)^2} / 2 ],

where ``m_i^{-i} ~ m_i - c_i (Y_i - m_i)`` is a one-step approximation of
the deleted fit.  The multiplier ``c_i`` is

* ``H_i / (1 - H_i)`` for the Newton-Raphson route (``acv``),
* ``4 b''_i S_i / (1 - S_i)`` for the lower-bound route (Bernoulli),
* ``2 b''_i S_i / (1 - S_i) + H_i / {2 (1 - H_i)}`` for the hybrid.

The empirical versions replace ``H_i`` (and ``S_i``) by the calibrated
average ``df_E / n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _engine
from .divergence import BregmanDivergence, clip_mean, get_divergence
from .exceptions import (
    CurvatureError,
    FamilyMismatchError,
    InsufficientDataError,
    LeverageError,
    SingularMatrixError,
)
from .family import get_family
from .kernelmath import equivalent_kernel_at_zero, get_kernel
from .locfit import Dataset, LocalFitConfig, LocalFitResult, fit_at, fit_curve, fit_loo

__all__ = [
    "CRITERIA",
    "PredictionErrorEstimate",
    "DFConstants",
    "TABLE2",
    "table2_constants",
    "default_df_constants",
    "GridSpec",
    "BandwidthSelection",
    "loo_exact",
    "loo_approx",
    "err_cv_exact",
    "err_acv",
    "empirical_df",
    "err_ecv",
    "err_hybrid",
    "err_hybrid_ecv",
    "ecv_from_average",
    "hybrid_ecv_from_average",
    "penalty_multipliers",
    "h0_spacing",
    "select_bandwidth",
    "normalize_criterion",
    "evaluate_criterion",
]

CRITERIA = ("cv_exact", "acv", "acv_lb", "ecv", "hybrid", "hybrid_ecv")
_LEVERAGE_CAP = 1.0 - 1e-8


@dataclass(frozen=True, eq=False)
class PredictionErrorEstimate:
    """Estimated total prediction error.

    ``value`` is the sum of the finite ``per_observation`` terms, rescaled
    by ``n / (n - n_excluded)`` when observations had to be excluded.
    """

    criterion: str
    value: float
    divergence: str
    h: float
    per_observation: np.ndarray | None = None
    flags: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DFConstants:
    """Constants ``(a, C)`` of the empirical degrees-of-freedom formula."""

    a: float
    C: float
    design: str = "random"
    overridden: bool = False


# (p, design) -> (a, C)
TABLE2 = {
    (0, "fixed"): (0.55, 1.00), (0, "random"): (0.30, 0.99),
    (1, "fixed"): (0.55, 1.00), (1, "random"): (0.70, 1.03),
    (2, "fixed"): (1.55, 1.00), (2, "random"): (1.30, 0.99),
    (3, "fixed"): (1.55, 1.00), (3, "random"): (1.70, 1.03),
}
_BERNOULLI_H = (0.70, 1.09)


def table2_constants(p: int, design: str = "random") -> DFConstants:
    if (p, design) not in TABLE2:
        raise ValueError(f"no tabulated constants for p={p}, design={design!r}")
    a, c = TABLE2[(p, design)]
    return DFConstants(a, c, design)


def default_df_constants(family, p: int, target: str = "H", design: str = "random") -> DFConstants:
    """Tabulated constants, with the Bernoulli ``p = 1`` adjustment for ``H``.

    ``target`` is ``"H"`` (leverages) or ``"S"`` (lower-bound diagonals,
    which are response-free and use the tabulated column).
    """
    family = get_family(family)
    if family.kind == "bernoulli" and p == 1 and target == "H" and design == "random":
        return DFConstants(*_BERNOULLI_H, design)
    return table2_constants(p, design)


def _constants_flagged(c: DFConstants) -> DFConstants:
    known = set(TABLE2.values()) | {_BERNOULLI_H}
    if (c.a, c.C) not in known and not c.overridden:
        return DFConstants(c.a, c.C, c.design, True)
    return c


# ---------------------------------------------------------------------------
# leave-one-out


def loo_exact(dataset: Dataset, family, config: LocalFitConfig, i: int) -> float:
    """``m_i^{-i}``: refit at ``X_i`` without observation ``i``."""
    family = get_family(family)
    beta, _ = fit_at(dataset, family, dataset.x[i], config, exclude=i)
    return float(family.mean(family.clamp(beta[0])))


def _obs(fit: LocalFitResult):
    if fit.obs_theta is None:
        raise ValueError("fit has no values at the observations; fit at the observations")
    return fit.obs_theta, fit.obs_mean


def loo_approx(fit: LocalFitResult, family, i: int, variant: str = "nr"):
    """One-step deleted fit ``(theta_i^{-i}, m_i^{-i})``.

    ``variant="nr"`` uses the leverage ``H_i``; ``variant="lb"`` (Bernoulli)
    uses the lower-bound diagonal ``S_i``.
    """
    family = get_family(family)
    theta, mean = _obs(fit)
    th, m, y = float(theta[i]), float(mean[i]), float(fit.y[i])
    var = float(family.variance(family.clamp(th)))
    r = y - m
    if variant == "nr":
        hi = float(fit.H[i])
        if not hi < _LEVERAGE_CAP:
            raise LeverageError(f"leverage H_{i} = {hi} too close to 1")
        c = hi / (1.0 - hi)
        return th - c * r / var, m - c * r
    if variant == "lb":
        if family.kind != "bernoulli":
            raise FamilyMismatchError("the lower-bound approximation is for the Bernoulli family")
        si = float(fit.S_diag[i])
        if not si < _LEVERAGE_CAP:
            raise LeverageError(f"S_{i} = {si} too close to 1")
        c = 4.0 * si / (1.0 - si)
        return th - c * r, m - c * var * r
    raise ValueError("variant must be 'nr' or 'lb'")


def _bind(div, family) -> BregmanDivergence:
    div = get_divergence(div, family)
    if div.kind == "deviance" and div.family.kind != get_family(family).kind:
        raise FamilyMismatchError("deviance divergence and fit use different families")
    return div


def _reduce(terms, n):
    finite = np.isfinite(terms)
    excluded = int(n - finite.sum())
    if excluded == n:
        return math.inf, excluded
    return float(np.sum(terms[finite]) * n / (n - excluded)), excluded


def _losses(div, y, m):
    ok = np.isfinite(m)
    mc, nclip = clip_mean(div, np.where(ok, m, 0.5))
    out = np.where(ok, div.losses(y, mc), np.nan)
    return out, mc, nclip


def err_cv_exact(dataset: Dataset, family, div, config: LocalFitConfig, threads=None,
                 offset=None) -> PredictionErrorEstimate:
    """``sum_i Q(Y_i, m_i^{-i})`` from ``n`` honest refits.

    Failed refits are excluded and the sum is rescaled by
    ``n / (n - failures)``; the count is reported in ``flags``.
    """
    family = get_family(family)
    div = _bind(div, family)
    div.check_response(dataset.y)
    _, m_loo, ok = fit_loo(dataset, family, config, threads=threads, offset=offset)
    terms, _, nclip = _losses(div, dataset.y, np.where(ok, m_loo, np.nan))
    value, excluded = _reduce(terms, dataset.n)
    return PredictionErrorEstimate("cv_exact", value, div.token, config.bandwidth, terms,
                                   {"n_failed": excluded, "n_clipped": nclip})


def _curvature_criterion(name, fit, div, c):
    theta, mean = _obs(fit)
    y = fit.y
    terms, mc, nclip = _losses(div, y, mean)
    q2 = div.q2(mc)
    r2 = (y - mc) ** 2
    with np.errstate(invalid="ignore", over="ignore"):
        pen = 0.5 * q2 * r2 * (1.0 - (1.0 + c) ** 2)
        terms = terms + pen
    flags = {"n_clipped": nclip, "clamped": bool(fit.flags.get("clamped", False))}
    overflow = ~np.isfinite(c) & np.isfinite(mean)
    if overflow.any():
        flags["leverage_overflow"] = int(overflow.sum())
        return PredictionErrorEstimate(name, math.inf, div.token, fit.h, terms, flags)
    value, excluded = _reduce(terms, fit.n)
    flags["n_failed"] = excluded
    return PredictionErrorEstimate(name, value, div.token, fit.h, terms, flags)


def _require_curvature(div):
    if not div.has_curvature:
        raise CurvatureError(f"{div.kind} loss has no curvature; use it for evaluation only")


def _ratio(v):
    v = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(v < _LEVERAGE_CAP, v / (1.0 - v), np.inf)


def _bernoulli_fit(fit):
    if fit.family.kind != "bernoulli":
        raise FamilyMismatchError("criterion defined for the Bernoulli family only")
    if fit.S_diag is None:
        raise ValueError("fit carries no lower-bound diagonals; refit with diagnostics")


def penalty_multipliers(fit: LocalFitResult) -> dict:
    """Per-observation multipliers ``c_i`` of the three routes (Bernoulli).

    Keys ``nr``, ``lb`` and ``hybrid``; the hybrid is their average.
    """
    _bernoulli_fit(fit)
    var = fit.variance_obs
    hr, sr = _ratio(fit.H), _ratio(fit.S_diag)
    return {"nr": hr, "lb": 4.0 * var * sr, "hybrid": 2.0 * var * sr + 0.5 * hr}


def err_acv(fit: LocalFitResult, div, variant: str = "nr") -> PredictionErrorEstimate:
    """Approximate cross-validation from the leverages (or ``S_i`` for ``lb``)."""
    div = _bind(div, fit.family)
    _require_curvature(div)
    if variant == "nr":
        return _curvature_criterion("acv", fit, div, _ratio(fit.H))
    if variant == "lb":
        _bernoulli_fit(fit)
        return _curvature_criterion("acv_lb", fit, div, 4.0 * fit.variance_obs * _ratio(fit.S_diag))
    raise ValueError("variant must be 'nr' or 'lb'")


def empirical_df(p: int, n: int, h: float, kernel, support_length: float, constants: DFConstants) -> float:
    """``(p + 1 - a) + C n/(n - 1) K0 |Omega| / h`` with ``K0`` the equivalent kernel at 0."""
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    if n <= 1:
        raise ValueError("need n > 1")
    k0 = equivalent_kernel_at_zero(get_kernel(kernel), p)
    return (p + 1 - constants.a) + constants.C * n / (n - 1) * k0 * support_length / h


def _df_inputs(fit, p, n, h, kernel, support_length):
    return (fit.degree if p is None else p, fit.n if n is None else n, fit.h if h is None else h,
            fit.config.kernel if kernel is None else kernel,
            fit.support_length if support_length is None else support_length)


def err_ecv(fit: LocalFitResult, div, p=None, n=None, h=None, kernel=None, support_length=None,
            constants: DFConstants | None = None) -> PredictionErrorEstimate:
    """Empirical cross-validation: every ``H_i`` replaced by ``df_E / n``.

    Unspecified inputs are taken from ``fit``; the constants default to the
    tabulated random-design values for the fit's family.
    """
    p, n, h, kernel, L = _df_inputs(fit, p, n, h, kernel, support_length)
    constants = _constants_flagged(constants or default_df_constants(fit.family, p))
    est = ecv_from_average(fit, div, empirical_df(p, n, h, kernel, L, constants) / n)
    est.flags["constants_overridden"] = constants.overridden
    return est


def ecv_from_average(fit, div, hbar: float, name: str = "ecv") -> PredictionErrorEstimate:
    """The ACV formula with every leverage set to ``hbar``."""
    div = _bind(div, fit.family)
    _require_curvature(div)
    est = _curvature_criterion(name, fit, div, np.full(fit.n, float(_ratio(hbar))))
    est.flags["h_bar"] = hbar
    return est


def err_hybrid(fit: LocalFitResult, div) -> PredictionErrorEstimate:
    """Bernoulli hybrid of the Newton-Raphson and lower-bound corrections."""
    div = _bind(div, fit.family)
    _require_curvature(div)
    return _curvature_criterion("hybrid", fit, div, penalty_multipliers(fit)["hybrid"])


def err_hybrid_ecv(fit: LocalFitResult, div, constants_h: DFConstants | None = None,
                   constants_s: DFConstants | None = None) -> PredictionErrorEstimate:
    """Hybrid criterion with ``H_i`` and ``S_i`` replaced by their empirical averages."""
    p, n, h, kernel, L = _df_inputs(fit, None, None, None, None, None)
    ch = _constants_flagged(constants_h or default_df_constants(fit.family, p, "H"))
    cs = _constants_flagged(constants_s or default_df_constants(fit.family, p, "S"))
    return hybrid_ecv_from_average(fit, div, empirical_df(p, n, h, kernel, L, ch) / n,
                                   empirical_df(p, n, h, kernel, L, cs) / n)


def hybrid_ecv_from_average(fit, div, hbar: float, sbar: float) -> PredictionErrorEstimate:
    div = _bind(div, fit.family)
    _require_curvature(div)
    if fit.family.kind != "bernoulli":
        raise FamilyMismatchError("criterion defined for the Bernoulli family only")
    c = 2.0 * fit.variance_obs * _ratio(sbar) + 0.5 * _ratio(hbar)
    est = _curvature_criterion("hybrid_ecv", fit, div, c)
    est.flags.update(h_bar=hbar, s_bar=sbar)
    return est


# ---------------------------------------------------------------------------
# bandwidth search


def h0_spacing(x) -> float:
    """``h0 = max(5/n, largest gap between consecutive sorted x)``."""
    x = np.sort(np.asarray(x, dtype=float))
    gap = float(np.max(np.diff(x))) if x.size > 1 else 0.0
    return max(5.0 / x.size, gap)


@dataclass(frozen=True)
class GridSpec:
    """Bandwidth grid.

    By default ``npts`` geometric points from ``h_min = h_min_factor * h0``
    to half the support length.  ``lo``/``hi`` override either end.
    """

    lo: float | None = None
    hi: float | None = None
    npts: int = 30
    geometric: bool = True
    h_min_factor: float = 3.0

    def resolve(self, x, support_length: float):
        if self.npts < 1:
            raise ValueError("grid needs at least one point")
        if self.lo is not None:
            lo, rule = float(self.lo), f"h_min={self.lo:g} (fixed)"
        else:
            h0 = h0_spacing(x)
            lo, rule = self.h_min_factor * h0, f"h_min={self.h_min_factor:g}*h0, h0={h0:.6g}"
        hi = 0.5 * support_length if self.hi is None else float(self.hi)
        if self.npts == 1:
            return np.array([lo]), rule
        if not (0 < lo < hi):
            raise ValueError(f"empty bandwidth range [{lo:g}, {hi:g}]")
        grid = np.geomspace(lo, hi, self.npts) if self.geometric else np.linspace(lo, hi, self.npts)
        return grid, rule

    @classmethod
    def parse(cls, text: str, **kw) -> "GridSpec":
        """``"lo:hi:npts[:geom|lin]"``; empty ``lo``/``hi`` keep the defaults."""
        parts = text.split(":")
        if len(parts) not in (3, 4):
            raise ValueError("grid must look like lo:hi:npts[:geom|lin]")
        lo = float(parts[0]) if parts[0] else None
        hi = float(parts[1]) if parts[1] else None
        geometric = True
        if len(parts) == 4:
            if parts[3] not in ("geom", "lin"):
                raise ValueError("grid spacing must be 'geom' or 'lin'")
            geometric = parts[3] == "geom"
        return cls(lo=lo, hi=hi, npts=int(parts[2]), geometric=geometric, **kw)


@dataclass(frozen=True, eq=False)
class BandwidthSelection:
    grid: np.ndarray
    criterion_values: np.ndarray
    selected_h: float
    selected_index: int
    criterion: str
    divergence: str
    h_min_rule: str
    flags: dict = field(default_factory=dict)


def normalize_criterion(name: str) -> str:
    token = str(name).lower().replace("-", "_")
    token = {"cv": "cv_exact"}.get(token, token)
    if token not in CRITERIA:
        raise ValueError(f"unknown criterion {name!r}")
    return token


def _check_criterion(criterion, family, div):
    if criterion in ("hybrid", "hybrid_ecv", "acv_lb") and family.kind != "bernoulli":
        raise FamilyMismatchError(f"criterion {criterion} needs the Bernoulli family")
    if criterion != "cv_exact":
        _require_curvature(div)


def evaluate_criterion(dataset: Dataset, family, div, criterion: str, config: LocalFitConfig,
                       constants=None, offset=None) -> PredictionErrorEstimate:
    """One criterion value at ``config.bandwidth``."""
    family = get_family(family)
    if criterion == "cv_exact":
        return err_cv_exact(dataset, family, div, config, threads=1, offset=offset)
    needs_s = criterion in ("hybrid", "acv_lb")
    fit = fit_curve(dataset, family, config, with_diagnostics=needs_s, threads=1, offset=offset)
    if criterion == "acv":
        return err_acv(fit, div)
    if criterion == "acv_lb":
        return err_acv(fit, div, "lb")
    if criterion == "ecv":
        return err_ecv(fit, div, constants=constants)
    if criterion == "hybrid":
        return err_hybrid(fit, div)
    return err_hybrid_ecv(fit, div)


def select_bandwidth(dataset: Dataset, family, div, criterion: str = "ecv",
                     grid_spec: GridSpec | None = None, config: LocalFitConfig | None = None,
                     constants: DFConstants | None = None, threads=None, offset=None) -> BandwidthSelection:
    """Minimise a prediction-error criterion over a bandwidth grid.

    ``config`` supplies everything but the bandwidth (degree, kernel,
    algorithm, tolerances); ``offset`` is a fixed addition to the linear
    predictor.  A grid point whose fit fails entirely gets
    ``+inf``; ties go to the smallest bandwidth.
    """
    family = get_family(family)
    div = _bind(div, family)
    criterion = normalize_criterion(criterion)
    _check_criterion(criterion, family, div)
    div.check_response(dataset.y)
    family.check_response(dataset.y)
    grid, rule = (grid_spec or GridSpec()).resolve(dataset.x, dataset.support_length)
    template = config or LocalFitConfig(bandwidth=float(grid[0]))

    def one(h):
        try:
            est = evaluate_criterion(dataset, family, div, criterion, template.with_bandwidth(h), constants,
                                     offset)
            return est.value, est.flags
        except (InsufficientDataError, SingularMatrixError) as exc:
            return math.inf, {"error": type(exc).__name__}

    out = _engine.map_ordered(one, grid, threads)
    values = np.array([v for v, _ in out], dtype=float)
    if not np.isfinite(values).any():
        raise InsufficientDataError("criterion is infinite at every bandwidth")
    idx = int(np.argmin(np.where(np.isnan(values), np.inf, values)))
    flags = {"n_infinite": int(np.sum(~np.isfinite(values))),
             "per_h": [f for _, f in out]}
    return BandwidthSelection(grid, values, float(grid[idx]), idx, criterion, div.token, rule, flags)
