"""Command-line interface.

Exit status: 0 on success, 2 on invalid input (one ``error: ...`` line on
stderr), 1 when a computation fails (a JSON diagnostics line on stderr).
Artifacts are written to a temporary file and renamed into place, so a
failed run leaves nothing behind.  Outputs carry a provenance record and
no timestamps, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import warnings
from dataclasses import replace

import numpy as np

from . import __version__
from .asymptotic import table1
from .divergence import get_divergence, loss_curve_points
from .exceptions import (
    CurvatureError,
    DomainError,
    FamilyMismatchError,
    InsufficientDataError,
    LeverageError,
    SingularMatrixError,
)
from .family import get_family
from .locfit import Dataset, LocalFitConfig, fit_curve
from .loocv import DFConstants, GridSpec, empirical_df, normalize_criterion, select_bandwidth, table2_constants
from .semipar import PLDataset, two_stage_select
from .simlab import DESIGNS, SelectorConfig, SimDesign, generate, replicate
from .varcoef import VCDataset, empirical_df_vc, fit_vc, select_bandwidth_vc

__all__ = ["main", "run"]


class UsageError(Exception):
    """Invalid command-line input (exit status 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# output helpers


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if np.isnan(v):
        return "nan"
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".12g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


def _csv_text(header, rows, provenance) -> str:
    buf = io.StringIO()
    for key, value in provenance.items():
        buf.write(f"# {key}: {value}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _json_text(payload, provenance) -> str:
    return json.dumps(_jsonable({"provenance": provenance, **payload}), indent=2) + "\n"


def _commit(files: dict):
    """Write every ``path -> text`` pair atomically (temp file + rename)."""
    staged = []
    try:
        for path, text in files.items():
            folder = os.path.dirname(os.path.abspath(path))
            os.makedirs(folder, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            staged.append((tmp, path))
        for tmp, path in staged:
            os.replace(tmp, path)
    finally:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.remove(tmp)


# ---------------------------------------------------------------------------
# input helpers


def _read_table(path, expect_first, min_cols):
    try:
        with open(path, newline="") as fh:
            lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    if not lines:
        raise UsageError(f"{path} is empty")
    reader = csv.reader(lines)
    header = [h.strip() for h in next(reader)]
    if not header or header[0] != expect_first or header[-1] != "y" or len(header) < min_cols:
        raise UsageError(f"{path}: header must start with '{expect_first}' and end with 'y'")
    try:
        data = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
    except ValueError:
        raise UsageError(f"{path}: non-numeric value") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise UsageError(f"{path}: ragged rows")
    if not np.all(np.isfinite(data)):
        raise UsageError(f"{path}: non-finite value")
    return header, data


def _support(args, values):
    lo = float(np.min(values)) if args.xmin is None else args.xmin
    hi = float(np.max(values)) if args.xmax is None else args.xmax
    return lo, hi


def _load_uni(args):
    if args.data is not None:
        _, t = _read_table(args.data, "x", 2)
        if t.shape[1] != 2:
            raise UsageError("univariate data must have columns x,y")
        return Dataset.from_unsorted(t[:, 0], t[:, 1], _support(args, t[:, 0]))
    if getattr(args, "design", None) is None:
        raise UsageError("give --data or --design")
    return _design_data(args, varying=False)


def _load_vc(args):
    if args.data is not None:
        header, t = _read_table(args.data, "u", 3)
        d = t.shape[1] - 2
        if args.d is not None and args.d != d:
            raise UsageError(f"--d {args.d} does not match the {d} covariate columns")
        return VCDataset.from_unsorted(t[:, 0], t[:, 1:-1], t[:, -1], _support(args, t[:, 0]))
    if getattr(args, "design", None) is None:
        raise UsageError("give --data or --design")
    return _design_data(args, varying=True)


def _design_data(args, varying):
    if args.design not in DESIGNS:
        raise UsageError(f"unknown design {args.design}")
    if DESIGNS[args.design].varying != varying:
        raise UsageError(f"design {args.design} does not fit this subcommand")
    return generate(SimDesign(args.design, args.n, args.seed))


def _grid(args) -> GridSpec:
    """Grid from ``--grid``/``--hmin-factor``; a built-in design supplies its own h_min rule."""
    base = GridSpec()
    design = getattr(args, "design", None)
    if design is not None and getattr(args, "data", None) is None:
        base = DESIGNS[design].grid_spec()
    factor = base.h_min_factor if args.hmin_factor is None else args.hmin_factor
    if args.hmin_factor is not None:
        base = GridSpec(h_min_factor=factor)
    if args.grid is None:
        return base
    try:
        spec = GridSpec.parse(args.grid, h_min_factor=factor)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if spec.lo is None and base.lo is not None and args.hmin_factor is None:
        spec = replace(spec, lo=base.lo)
    return spec


def _family_token(args, default=None):
    if default is None and getattr(args, "design", None) in DESIGNS and getattr(args, "data", None) is None:
        default = DESIGNS[args.design].family
    if args.family is None:
        if default is None:
            raise UsageError("--family is required")
        return default
    return args.family


def _config(args, h=0.5) -> LocalFitConfig:
    try:
        return LocalFitConfig(bandwidth=h, degree=args.degree, kernel=args.kernel, algorithm=args.algorithm,
                              max_iterations=args.max_iterations, tolerance=args.tolerance, ridge=args.ridge)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _check_combo(family, div, criterion):
    if criterion in ("hybrid", "hybrid_ecv", "acv_lb") and family != "bernoulli":
        raise UsageError(f"criterion {criterion} requires --family bernoulli")
    if criterion != "cv_exact" and div in ("misclass", "hinge"):
        raise UsageError(f"divergence {div} has no curvature; only --criterion cv can use it")
    if div in ("exploss", "misclass", "hinge") and family != "bernoulli":
        raise UsageError(f"divergence {div} needs binary responses")


# ---------------------------------------------------------------------------
# subcommands


def cmd_table1(args, prov):
    rows = table1(n=args.n)
    header = ["family", "example", "h_ampec", "h_amise", "paper_h_ampec", "paper_h_amise", "delta"]
    text = _csv_text(header, [[r[k] for k in header] for r in rows], prov)
    return {args.out: text} if args.out else {"-": text}


def cmd_losses(args, prov):
    lo, hi, npts = _parse_range(args.margins)
    m = np.linspace(lo, hi, npts)
    kinds = ["quadratic", "deviance", "exploss", "hinge", "misclass"]
    cols = [loss_curve_points(get_divergence(k, "bernoulli"), m)[:, 1] for k in kinds]
    rows = [[m[i]] + [c[i] for c in cols] for i in range(npts)]
    text = _csv_text(["margin"] + kinds, rows, prov)
    return {args.out: text} if args.out else {"-": text}


def _parse_range(text):
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise UsageError("range must look like lo:hi:npts") from None
    if n < 2 or not hi > lo:
        raise UsageError("range needs hi > lo and at least two points")
    return lo, hi, n


def cmd_fit(args, prov):
    data = _load_uni(args)
    family = get_family(_family_token(args))
    cfg = _config(args, args.bandwidth)
    evalp = None
    if args.eval_points is not None:
        lo, hi, n = _parse_range(args.eval_points)
        evalp = np.linspace(lo, hi, n)
    fit = fit_curve(data, family, cfg, eval_points=evalp, threads=args.threads)
    p = cfg.degree
    header = ["x", "theta_hat", "m_hat"] + [f"beta{k}" for k in range(p + 1)] + ["converged", "boundary", "iterations"]
    at_obs = evalp is None
    if at_obs:
        header += ["y", "H", "S"]
    rows = []
    for j, x in enumerate(fit.eval_points):
        row = [x, fit.theta_hat[j], fit.m_hat[j], *fit.beta[j], fit.converged[j], fit.boundary_flag[j], fit.iterations[j]]
        if at_obs:
            row += [data.y[j], fit.H[j], fit.S_diag[j]]
        rows.append(row)
    summary = {"family": family.kind, "bandwidth": cfg.bandwidth, "degree": p, "algorithm": cfg.algorithm,
               "n": data.n, "support": list(data.support), "flags": fit.flags}
    if at_obs:
        summary["sum_H"] = float(np.nansum(fit.H))
    return _with_summary(args, _csv_text(header, rows, prov), summary, prov)


def cmd_fit_vc(args, prov):
    data = _load_vc(args)
    family = get_family(_family_token(args))
    cfg = _config(args, args.bandwidth)
    fit = fit_vc(data, family, cfg, standard_errors=True, threads=args.threads)
    d, p = data.d, cfg.degree
    names = [f"a{l + 1}" + "'" * k for k in range(p + 1) for l in range(d)]
    header = ["u"] + names + [f"se_a{l + 1}" for l in range(d)] + ["theta_hat", "m_hat", "y", "H", "S",
                                                                    "converged", "boundary"]
    rows = [[data.u[i], *fit.beta[i], *fit.se[i], fit.obs_theta[i], fit.obs_mean[i], data.y[i], fit.H[i],
             fit.S_diag[i], fit.converged[i], fit.boundary_flag[i]] for i in range(data.n)]
    summary = {"family": family.kind, "bandwidth": cfg.bandwidth, "degree": p, "d": d, "n": data.n,
               "sum_H": float(np.nansum(fit.H)), "flags": fit.flags}
    return _with_summary(args, _csv_text(header, rows, prov), summary, prov)


def _selection_outputs(args, sel, prov, extra):
    rows = [[h, v] for h, v in zip(sel.grid, sel.criterion_values)]
    text = _csv_text(["h", "criterion"], rows, prov)
    flags = {k: v for k, v in sel.flags.items() if k != "per_h"}
    summary = {"selected_h": sel.selected_h, "index": sel.selected_index, "criterion": sel.criterion,
               "divergence": sel.divergence, "h_min_rule": sel.h_min_rule, **extra, "flags": flags}
    return _with_summary(args, text, summary, prov)


def cmd_select(args, prov):
    data = _load_uni(args)
    fam = _family_token(args, DESIGNS[args.design].family if args.design else None)
    crit = normalize_criterion(args.criterion)
    _check_combo(fam, args.divergence, crit)
    sel = select_bandwidth(data, fam, args.divergence, crit, _grid(args), _config(args), threads=args.threads)
    return _selection_outputs(args, sel, prov, {"family": fam, "n": data.n})


def cmd_select_vc(args, prov):
    data = _load_vc(args)
    fam = _family_token(args, DESIGNS[args.design].family if args.design else None)
    crit = normalize_criterion(args.criterion)
    _check_combo(fam, args.divergence, crit)
    sel = select_bandwidth_vc(data, fam, args.divergence, crit, _grid(args), _config(args), threads=args.threads)
    return _selection_outputs(args, sel, prov, {"family": fam, "n": data.n, "d": data.d})


def cmd_semipar(args, prov):
    header, t = _read_table(args.data, "u", 2)
    data = PLDataset.from_unsorted(t[:, 0], t[:, 1:-1], t[:, -1], _support(args, t[:, 0]))
    fam = _family_token(args, "gaussian")
    crit = normalize_criterion(args.criterion)
    _check_combo(fam, args.divergence, crit)
    res = two_stage_select(data, fam, args.divergence, _grid(args), _config(args), crit, threads=args.threads)
    rows = [[data.u[i], res.a_hat[i]] for i in range(data.n)]
    summary = {"h_hat": res.h_hat, "beta_h0": res.beta_h0, "beta_hat": res.beta_hat, "rounds": res.rounds,
               "converged": res.converged, "experimental": res.experimental, "h_min_rule": res.selection.h_min_rule}
    return _with_summary(args, _csv_text(["u", "a_hat"], rows, prov), summary, prov)


def cmd_dof(args, prov):
    if args.design is None:
        raise UsageError("--design is required")
    spec = DESIGNS.get(args.design)
    if spec is None:
        raise UsageError(f"unknown design {args.design}")
    fam = _family_token(args, spec.family)
    if fam != spec.family:
        raise UsageError(f"design {args.design} has family {spec.family}")
    data = generate(SimDesign(args.design, args.n, args.seed))
    grid, _ = _grid(args).resolve(data.x, data.support_length)
    cfg = _config(args)
    if args.constants is not None:
        try:
            a, c = (float(v) for v in args.constants.split(","))
        except ValueError:
            raise UsageError("--constants must look like a,C") from None
        const = DFConstants(a, c, overridden=True)
    elif args.fixed_design:
        const = table2_constants(cfg.degree, "fixed")
    else:
        const = table2_constants(cfg.degree)
    rows = []
    for h in grid:
        c = cfg.with_bandwidth(float(h))
        if spec.varying:
            fit = fit_vc(data, fam, c, with_diagnostics=False, threads=args.threads)
            emp = empirical_df_vc(c.degree, data.n, data.d, h, c.kernel, data.support_length, const)
        else:
            fit = fit_curve(data, fam, c, with_diagnostics=False, threads=args.threads)
            emp = empirical_df(c.degree, data.n, h, c.kernel, data.support_length, const)
        rows.append([h, float(np.nansum(fit.H)), emp])
    text = _csv_text(["h", "sum_H_actual", "sum_H_empirical"], rows, prov)
    return {args.out: text} if args.out else {"-": text}


def cmd_simulate(args, prov):
    if args.design not in DESIGNS:
        raise UsageError(f"unknown design {args.design}")
    crit = normalize_criterion(args.criterion) if args.criterion else None
    spec = DESIGNS[args.design]
    if crit is not None:
        _check_combo(spec.family, args.divergence, crit)
    if args.reps < 1:
        raise UsageError("--reps must be at least 1")
    sel = SelectorConfig(criterion=crit, divergence=args.divergence, degree=args.degree, npts=args.npts,
                         algorithm=args.algorithm, kernel=args.kernel)
    s = replicate(SimDesign(args.design, args.n, args.seed), args.reps, sel, threads=args.threads)
    summary = {
        "design": s.design, "n": s.n, "seed": s.seed, "reps": s.reps, "criterion": s.criterion,
        "divergence": args.divergence, "n_failed": s.n_failed, "h_ampec": s.h_ampec, "h_amise": s.h_amise,
        "boxplot": s.boxplot, "typical_indices": {f"p{q}": v for q, v in s.typical_indices.items()},
        "per_rep": s.per_rep,
    }
    box_rows = []
    for name, st in s.boxplot.items():
        if st:
            box_rows.append([name] + [st[k] for k in ("n", "min", "whisker_low", "q1", "median", "q3",
                                                       "whisker_high", "max", "mean", "n_outliers")])
    box = _csv_text(["quantity", "n", "min", "whisker_low", "q1", "median", "q3", "whisker_high", "max",
                     "mean", "n_outliers"], box_rows, prov)
    tf = s.typical_fits
    qs = [q for q in (25, 50, 75) if q in tf]
    if spec.varying:
        d = spec.d
        header = ["grid"] + [f"truth_a{l + 1}" for l in range(d)] + [f"p{q}_a{l + 1}" for q in qs for l in range(d)]
        rows = [[tf["grid"][i], *tf["truth"][i], *[tf[q][i, l] for q in qs for l in range(d)]]
                for i in range(tf["grid"].size)]
    else:
        header = ["grid", "truth"] + [f"p{q}" for q in qs]
        rows = [[tf["grid"][i], tf["truth"][i], *[tf[q][i] for q in qs]] for i in range(tf["grid"].size)]
    out = args.outdir
    return {
        os.path.join(out, "summary.json"): _json_text(summary, prov),
        os.path.join(out, "boxplot.csv"): box,
        os.path.join(out, "typical_fits.csv"): _csv_text(header, rows, prov),
    }


def _with_summary(args, text, summary, prov):
    files = {args.out if args.out else "-": text}
    if getattr(args, "summary", None):
        files[args.summary] = _json_text(summary, prov)
    return files


# ---------------------------------------------------------------------------
# parser


def _common(p, fit=True):
    p.add_argument("--threads", type=int, default=None, help="worker threads (default BREGSMOOTH_THREADS or 1)")
    if fit:
        p.add_argument("--family", choices=["gaussian", "poisson", "bernoulli"])
        p.add_argument("--degree", type=int, default=1)
        p.add_argument("--kernel", choices=["epanechnikov", "uniform", "triangular"], default="epanechnikov")
        p.add_argument("--algorithm", choices=["newton_raphson", "lower_bound"], default="newton_raphson")
        p.add_argument("--max-iterations", type=int, default=None)
        p.add_argument("--tolerance", type=float, default=1e-8)
        p.add_argument("--ridge", type=float, default=1e-8)


def _data_args(p, design=True):
    p.add_argument("--data", help="CSV input file")
    p.add_argument("--xmin", type=float, default=None, help="lower support bound (default: observed minimum)")
    p.add_argument("--xmax", type=float, default=None, help="upper support bound (default: observed maximum)")
    if design:
        p.add_argument("--design", choices=sorted(DESIGNS), help="simulate data from a built-in design instead")
        p.add_argument("--n", type=int, default=400)
        p.add_argument("--seed", type=int, default=0)


def _grid_args(p):
    p.add_argument("--grid", help="lo:hi:npts[:geom|lin]; empty lo/hi keep the defaults")
    p.add_argument("--hmin-factor", type=float, default=None, help="h_min = factor * h0 (default 3)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bregsmooth", description="Local likelihood smoothing and bandwidth selection.")
    parser.add_argument("--version", action="version", version=f"bregsmooth {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("fit", help="local polynomial likelihood fit")
    _data_args(p); _common(p)
    p.add_argument("--bandwidth", type=float, required=True)
    p.add_argument("--eval-points", help="lo:hi:npts evaluation grid (default: the observations); use --eval-points=LO:HI:N for negative LO")
    p.add_argument("--out"); p.add_argument("--summary")

    p = sub.add_parser("fit-vc", help="varying-coefficient fit")
    _data_args(p); _common(p)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--bandwidth", type=float, required=True)
    p.add_argument("--out"); p.add_argument("--summary")

    for name in ("select", "select-vc"):
        p = sub.add_parser(name, help="bandwidth selection" + (" (varying coefficients)" if name.endswith("vc") else ""))
        _data_args(p); _common(p); _grid_args(p)
        if name == "select-vc":
            p.add_argument("--d", type=int, default=None)
        p.add_argument("--divergence", choices=["quadratic", "deviance", "exploss", "misclass", "hinge"], default="deviance")
        p.add_argument("--criterion", choices=["cv", "acv", "acv-lb", "ecv", "hybrid", "hybrid-ecv"], default="ecv")
        p.add_argument("--out"); p.add_argument("--summary")

    p = sub.add_parser("semipar", help="two-stage bandwidth for a partially linear model")
    _data_args(p, design=False); _common(p); _grid_args(p)
    p.add_argument("--divergence", choices=["quadratic", "deviance", "exploss"], default="deviance")
    p.add_argument("--criterion", choices=["cv", "acv", "ecv"], default="ecv")
    p.add_argument("--out"); p.add_argument("--summary")

    p = sub.add_parser("simulate", help="replicated bandwidth selection on a built-in design")
    _common(p, fit=False)
    p.add_argument("--design", required=True, choices=sorted(DESIGNS))
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--criterion", choices=["cv", "acv", "acv-lb", "ecv", "hybrid", "hybrid-ecv"], default=None)
    p.add_argument("--divergence", choices=["quadratic", "deviance", "exploss"], default="deviance")
    p.add_argument("--degree", type=int, default=1)
    p.add_argument("--npts", type=int, default=30)
    p.add_argument("--kernel", choices=["epanechnikov", "uniform", "triangular"], default="epanechnikov")
    p.add_argument("--algorithm", choices=["newton_raphson", "lower_bound"], default="newton_raphson")
    p.add_argument("--outdir", default=".")

    p = sub.add_parser("table1", help="asymptotic optimal bandwidths of the six univariate designs")
    _common(p, fit=False)
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--out")

    p = sub.add_parser("dof", help="actual versus empirical degrees of freedom over a bandwidth grid")
    _common(p); _grid_args(p)
    p.add_argument("--design", choices=sorted(DESIGNS))
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fixed-design", action="store_true", help="use the fixed-design constants")
    p.add_argument("--constants", help="override as a,C")
    p.add_argument("--out")

    p = sub.add_parser("losses", help="margin view of the binary losses")
    _common(p, fit=False)
    p.add_argument("--margins", default="-2:2:81", help="lo:hi:npts; write --margins=-2:2:81 when lo is negative")
    p.add_argument("--out")
    return parser


_COMMANDS = {
    "fit": cmd_fit, "fit-vc": cmd_fit_vc, "select": cmd_select, "select-vc": cmd_select_vc,
    "semipar": cmd_semipar, "simulate": cmd_simulate, "table1": cmd_table1, "dof": cmd_dof,
    "losses": cmd_losses,
}

_VALIDATION = (UsageError, DomainError, FamilyMismatchError, CurvatureError)
_COMPUTATION = (InsufficientDataError, SingularMatrixError, LeverageError, FloatingPointError,
                np.linalg.LinAlgError)


def run(argv=None, stdout=None, stderr=None) -> int:
    """Run the CLI on ``argv``; returns the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        if args.threads is not None and args.threads < 1:
            raise UsageError("--threads must be positive")
        prov = {"tool": f"bregsmooth {__version__}", "command": " ".join(["bregsmooth", *argv]),
                "seed": getattr(args, "seed", None)}
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            files = _COMMANDS[args.command](args, prov)
    except SystemExit as exc:          # --help / --version
        return int(exc.code or 0)
    except _COMPUTATION as exc:
        stderr.write(json.dumps({"status": "failed", "error": type(exc).__name__, "message": _one_line(exc),
                                 "command": args.command}) + "\n")
        return 1
    except (*_VALIDATION, ValueError) as exc:
        stderr.write(f"error: {_one_line(exc)}\n")
        return 2
    to_disk = {k: v for k, v in files.items() if k != "-"}
    if "-" in files:
        stdout.write(files["-"])
    _commit(to_disk)
    return 0


def _one_line(exc) -> str:
    return " ".join(str(exc).split()) or type(exc).__name__


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
