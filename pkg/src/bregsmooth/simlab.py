"""Seeded simulation designs and the replication harness.

Random numbers come from the counter-based Philox generator; replication
``r`` of a run with seed ``s`` uses the key ``s + r``, so every replication
is reproducible on its own and independent of thread scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _engine
from .exceptions import InsufficientDataError, SingularMatrixError
from .family import get_family
from .locfit import Dataset, LocalFitConfig, fit_curve
from .loocv import GridSpec, select_bandwidth
from .varcoef import VCDataset, fit_vc, select_bandwidth_vc

__all__ = [
    "DESIGNS",
    "Design",
    "SimDesign",
    "SelectorConfig",
    "ReplicationSummary",
    "rng_for",
    "generate",
    "ase",
    "replicate",
    "model_spec",
    "typical_indices",
    "boxplot_stats",
]


def _bumps(scale, shift):
    def theta(x):
        x = np.asarray(x, dtype=float)
        return scale * (np.exp(-(4 * x - 1) ** 2) + np.exp(-(4 * x - 3) ** 2)) + shift

    def theta2(x):
        x = np.asarray(x, dtype=float)
        s1, s3 = 4 * x - 1, 4 * x - 3
        return scale * ((64 * s1**2 - 32) * np.exp(-s1**2) + (64 * s3**2 - 32) * np.exp(-s3**2))

    return theta, theta2


@dataclass(frozen=True)
class Design:
    """One simulation model.

    Univariate designs carry ``theta``/``theta2`` (the truth and its second
    derivative); varying-coefficient designs carry the coefficient
    functions ``coefs`` and the covariate law ``covariates``.
    """

    name: str
    family: str
    example: int
    h_min: tuple                    # ("factor", c) -> c*h0 ; ("fixed", v)
    theta: Callable | None = None
    theta2: Callable | None = None
    coefs: tuple = ()
    covariates: str = ""            # "correlated" | "independent"

    @property
    def varying(self) -> bool:
        return bool(self.coefs)

    @property
    def d(self) -> int:
        return len(self.coefs) if self.coefs else 1

    def grid_spec(self, npts: int = 30) -> GridSpec:
        kind, value = self.h_min
        if kind == "fixed":
            return GridSpec(lo=value, npts=npts)
        return GridSpec(npts=npts, h_min_factor=value)

    def coef_values(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.column_stack([f(u) for f in self.coefs])


_p1, _p1dd = _bumps(3.5, -1.5)
_b1, _b1dd = _bumps(7.0, -5.5)

DESIGNS = {
    "uni_poisson_1": Design("uni_poisson_1", "poisson", 1, ("factor", 3.0), _p1, _p1dd),
    "uni_poisson_2": Design("uni_poisson_2", "poisson", 2, ("factor", 3.0),
                            lambda x: np.sin(2 * (4 * np.asarray(x) - 2)) + 1.0,
                            lambda x: -64.0 * np.sin(8 * np.asarray(x) - 4)),
    "uni_poisson_3": Design("uni_poisson_3", "poisson", 3, ("factor", 3.0),
                            lambda x: 2 - 0.5 * (4 * np.asarray(x) - 2) ** 2,
                            lambda x: np.full_like(np.asarray(x, dtype=float), -16.0)),
    "uni_bernoulli_1": Design("uni_bernoulli_1", "bernoulli", 1, ("factor", 5.0), _b1, _b1dd),
    "uni_bernoulli_2": Design("uni_bernoulli_2", "bernoulli", 2, ("fixed", 0.1),
                              lambda x: 2.5 * np.sin(2 * np.pi * np.asarray(x)),
                              lambda x: -2.5 * (2 * np.pi) ** 2 * np.sin(2 * np.pi * np.asarray(x))),
    "uni_bernoulli_3": Design("uni_bernoulli_3", "bernoulli", 3, ("fixed", 0.1),
                              lambda x: 2 - (4 * np.asarray(x) - 2) ** 2,
                              lambda x: np.full_like(np.asarray(x, dtype=float), -32.0)),
    "vc_poisson_1": Design("vc_poisson_1", "poisson", 1, ("factor", 3.0), coefs=(
        lambda u: 5.5 + 0.1 * np.exp(2 * u - 1),
        lambda u: 0.8 * u * (1 - u),
    ), covariates="correlated"),
    "vc_poisson_2": Design("vc_poisson_2", "poisson", 2, ("factor", 3.0), coefs=(
        lambda u: 5.5 + 0.1 * np.exp(2 * u - 1),
        lambda u: 0.8 * u * (1 - u),
        lambda u: 0.2 * np.sin(2 * np.pi * u) ** 2,
    ), covariates="correlated"),
    "vc_bernoulli_1": Design("vc_bernoulli_1", "bernoulli", 1, ("fixed", 0.1), coefs=(
        lambda u: 1.3 * (np.exp(2 * u - 1) - 1.5),
        lambda u: 1.2 * (8 * u * (1 - u) - 1),
    ), covariates="independent"),
    "vc_bernoulli_2": Design("vc_bernoulli_2", "bernoulli", 2, ("fixed", 0.1), coefs=(
        lambda u: np.exp(2 * u - 1) - 1.5,
        lambda u: 0.8 * (8 * u * (1 - u) - 1),
        lambda u: 0.9 * (2 * np.sin(np.pi * u) - 1),
    ), covariates="independent"),
}


@dataclass(frozen=True)
class SimDesign:
    """A design name with sample size and seed."""

    model: str
    n: int = 400
    seed: int = 0

    def __post_init__(self):
        if self.model not in DESIGNS:
            raise ValueError(f"unknown design {self.model!r}; choose from {sorted(DESIGNS)}")
        if self.n < 50:
            raise ValueError("n must be at least 50")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a non-negative 64-bit integer")

    @property
    def spec(self) -> Design:
        return DESIGNS[self.model]


def rng_for(seed: int) -> np.random.Generator:
    """Philox stream keyed by ``seed``."""
    return np.random.Generator(np.random.Philox(key=int(seed) % 2**64))


def _draw(family: str, theta, rng):
    fam = get_family(family)
    m = fam.mean(fam.clamp(theta))
    if family == "poisson":
        return rng.poisson(m).astype(float)
    return (rng.random(m.size) < m).astype(float)


def generate(design: SimDesign):
    """Draw one data set; ``theta_true`` is kept for :func:`ase`."""
    spec = design.spec
    rng = rng_for(design.seed)
    n = design.n
    u = np.sort(rng.random(n))
    if not spec.varying:
        theta = spec.theta(u)
        return Dataset(u, _draw(spec.family, theta, rng), (0.0, 1.0), theta)
    if spec.covariates == "correlated":
        r = 1.0 / math.sqrt(2.0)
        z1, z2 = rng.standard_normal(n), rng.standard_normal(n)
        z = np.column_stack([z1, r * z1 + math.sqrt(1 - r * r) * z2])
    else:
        z = rng.standard_normal((n, 2))
    X = np.column_stack([np.ones(n), z])[:, : spec.d]
    theta = np.sum(X * spec.coef_values(u), axis=1)
    return VCDataset(u, X, _draw(spec.family, theta, rng), (0.0, 1.0), theta)


def ase(theta_hat, truth) -> float:
    """Average squared error ``mean((theta_hat - theta)^2)`` on the canonical scale."""
    theta_hat = np.asarray(theta_hat, dtype=float).ravel()
    truth = getattr(truth, "theta_true", truth)
    truth = np.asarray(truth, dtype=float).ravel()
    if theta_hat.shape != truth.shape:
        raise ValueError("theta_hat and truth differ in length")
    return float(np.mean((theta_hat - truth) ** 2))


def model_spec(name: str, n: int = 400, kernel="epanechnikov", p: int = 1):
    """Asymptotic-bandwidth inputs for a univariate design (uniform ``X``)."""
    from .asymptotic import ModelSpec

    spec = DESIGNS[name]
    if spec.varying:
        raise ValueError("asymptotic bandwidths are provided for univariate designs only")
    deriv = spec.theta2 if p == 1 else None
    return ModelSpec(spec.family, spec.theta, deriv, None, (0.0, 1.0), p, kernel, n)


@dataclass(frozen=True)
class SelectorConfig:
    """Bandwidth selector used in every replication.

    ``criterion=None`` means ECV for Poisson and the hybrid ECV for
    Bernoulli.
    """

    criterion: str | None = None
    divergence: str = "deviance"
    degree: int = 1
    npts: int = 30
    algorithm: str = "newton_raphson"
    kernel: str = "epanechnikov"

    def criterion_for(self, family: str) -> str:
        if self.criterion is not None:
            return self.criterion
        return "hybrid_ecv" if family == "bernoulli" else "ecv"


@dataclass(frozen=True, eq=False)
class ReplicationSummary:
    design: str
    n: int
    seed: int
    reps: int
    criterion: str
    per_rep: list
    h_ampec: float | None
    h_amise: float | None
    relative_errors: dict
    boxplot: dict
    typical_indices: dict
    typical_fits: dict
    n_failed: int
    flags: dict = field(default_factory=dict)


def typical_indices(ase_values) -> dict:
    """Replications whose ASE sits at the 25th, 50th and 75th percentiles.

    The percentile is taken as the order statistic of rank
    ``round(q (r - 1))``; ties go to the lowest replication index.
    """
    v = np.asarray(ase_values, dtype=float)
    if v.size == 0:
        return {}
    order = np.argsort(v, kind="stable")
    return {q: int(order[int(round(q / 100 * (v.size - 1)))]) for q in (25, 50, 75)}


def boxplot_stats(values) -> dict:
    """Quartiles, 1.5-IQR whiskers and outliers of a sample."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        return {}
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    inside = v[(v >= q1 - 1.5 * iqr) & (v <= q3 + 1.5 * iqr)]
    return {
        "n": int(v.size), "min": float(v[0]), "q1": float(q1), "median": float(med),
        "q3": float(q3), "max": float(v[-1]),
        "whisker_low": float(inside[0]), "whisker_high": float(inside[-1]),
        "mean": float(v.mean()), "n_outliers": int(v.size - inside.size),
    }


def _one_rep(design: Design, n: int, seed: int, sel: SelectorConfig):
    data = generate(SimDesign(design.name, n, seed))
    family = design.family
    crit = sel.criterion_for(family)
    base = LocalFitConfig(bandwidth=0.5, degree=sel.degree, kernel=sel.kernel, algorithm=sel.algorithm)
    grid = design.grid_spec(sel.npts)
    if design.varying:
        choice = select_bandwidth_vc(data, family, sel.divergence, crit, grid, base, threads=1)
        fit = fit_vc(data, family, base.with_bandwidth(choice.selected_h), with_diagnostics=False, threads=1)
        theta_hat = fit.obs_theta
    else:
        choice = select_bandwidth(data, family, sel.divergence, crit, grid, base, threads=1)
        fit = fit_curve(data, family, base.with_bandwidth(choice.selected_h), with_diagnostics=False, threads=1)
        theta_hat = fit.theta_hat
    return choice.selected_h, ase(theta_hat, data.theta_true)


def replicate(design: SimDesign, reps: int, selector: SelectorConfig | None = None,
              threads=None, curve_points: int = 101) -> ReplicationSummary:
    """Run ``reps`` seeded replications of bandwidth selection and fitting.

    Replication ``r`` uses seed ``design.seed + r``.  Failed replications
    are excluded and counted.  Relative errors of the selected bandwidth
    against ``h_AMPEC(q2)`` and ``h_AMISE`` are reported for univariate
    designs.
    """
    import warnings

    if reps < 1:
        raise ValueError("reps must be at least 1")
    sel = selector or SelectorConfig()
    spec = design.spec

    def run(r):
        seed = design.seed + r
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                h, a = _one_rep(spec, design.n, seed, sel)
            return {"rep": r, "seed": seed, "h": h, "ase": a, "failed": False}
        except (InsufficientDataError, SingularMatrixError, FloatingPointError) as exc:
            return {"rep": r, "seed": seed, "h": math.nan, "ase": math.nan, "failed": True,
                    "error": type(exc).__name__}

    per_rep = _engine.map_ordered(run, range(reps), threads)
    ok = [row for row in per_rep if not row["failed"]]
    hs = np.array([row["h"] for row in ok])
    ases = np.array([row["ase"] for row in ok])

    h_ampec_v = h_amise_v = None
    rel, box = {}, {}
    if not spec.varying and sel.degree % 2 == 1:
        from .asymptotic import h_ampec, h_amise

        ms = model_spec(spec.name, design.n, sel.kernel, sel.degree)
        h_ampec_v, h_amise_v = h_ampec(ms, "deviance"), h_amise(ms)
        rel = {"ampec": ((hs - h_ampec_v) / h_ampec_v).tolist(),
               "amise": ((hs - h_amise_v) / h_amise_v).tolist()}
        box = {k: boxplot_stats(v) for k, v in rel.items()}
    box["h"] = boxplot_stats(hs)
    box["ase"] = boxplot_stats(ases)

    typ_pos = typical_indices(ases)
    typ = {q: ok[i]["rep"] for q, i in typ_pos.items()}
    curves = _typical_curves(spec, design, sel, {q: ok[i] for q, i in typ_pos.items()}, curve_points)
    return ReplicationSummary(
        design=spec.name, n=design.n, seed=design.seed, reps=reps,
        criterion=sel.criterion_for(spec.family), per_rep=per_rep,
        h_ampec=h_ampec_v, h_amise=h_amise_v, relative_errors=rel, boxplot=box,
        typical_indices=typ, typical_fits=curves, n_failed=reps - len(ok),
    )


def _typical_curves(spec: Design, design: SimDesign, sel: SelectorConfig, rows: dict, npts: int) -> dict:
    """Truth and refitted curves of the typical replications on an even grid."""
    import warnings

    grid = np.linspace(0.0, 1.0, npts)
    out = {"grid": grid}
    if spec.varying:
        out["truth"] = spec.coef_values(grid)
    else:
        out["truth"] = spec.theta(grid)
    for q, row in rows.items():
        data = generate(SimDesign(spec.name, design.n, row["seed"]))
        cfg = LocalFitConfig(bandwidth=row["h"], degree=sel.degree, kernel=sel.kernel, algorithm=sel.algorithm)
        inside = grid[(grid >= data.support[0]) & (grid <= data.support[1])]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            if spec.varying:
                out[q] = fit_vc(data, spec.family, cfg, eval_points=inside, with_diagnostics=False, threads=1).A_hat
            else:
                out[q] = fit_curve(data, spec.family, cfg, eval_points=inside, with_diagnostics=False, threads=1).theta_hat
    return out
