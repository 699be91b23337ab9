"""Batched local likelihood solver.

Every local fit in the package reduces to maximising

    l(beta) = sum_j kw_j { y_j theta_j - b(theta_j) } / a,   theta_j = D_j beta + o_j,

for many fitting points at once.  ``D`` has shape ``(m, n, k)`` (fitting
point, observation, coefficient) and ``kw`` shape ``(m, n)``.  Points
advance independently; converged points drop out of the active set.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .exceptions import FamilyMismatchError
from .family import THETA_CLAMP, ExponentialFamily

#: |theta| beyond which a Bernoulli/Poisson window is declared degenerate.
DEGENERATE_THETA = 15.0
#: Elements per design chunk (m * n * k).
CHUNK_ELEMENTS = 2_000_000
_MAX_HALVINGS = 40
_COND_LIMIT = 1e14

OK, INSUFFICIENT, SINGULAR = 0, 1, 2


def default_threads(threads=None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("BREGSMOOTH_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def map_ordered(fn, items, threads=None):
    """``[fn(i) for i in items]``, optionally on a thread pool, in order."""
    threads = default_threads(threads)
    items = list(items)
    if threads == 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@dataclass
class SolverOptions:
    algorithm: str = "newton_raphson"
    max_iterations: int = 100
    tolerance: float = 1e-8
    grad_tolerance: float = 1e-10
    ridge: float = 1e-8
    step_halving: bool = True
    record_history: bool = False


@dataclass
class BatchResult:
    beta: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    boundary: np.ndarray
    status: np.ndarray
    clamped: np.ndarray
    loglik: np.ndarray
    sn_inv: np.ndarray          # inverse of S_n(beta_hat) (+ridge)
    s0_inv: np.ndarray          # inverse of D'KD (+ridge)
    history: list = field(default_factory=list)


def _ridged(M, ridge):
    k = M.shape[-1]
    if ridge <= 0:
        return M
    lam = ridge * np.trace(M, axis1=-2, axis2=-1) / k
    return M + lam[:, None, None] * np.eye(k)


def _safe_inv(M):
    """Batched inverse; returns (inverse, ok-mask).  Bad matrices give NaN."""
    m, k, _ = M.shape
    ok = np.all(np.isfinite(M), axis=(1, 2))
    with np.errstate(all="ignore"):
        cond = np.full(m, np.inf)
        if ok.any():
            cond[ok] = np.linalg.cond(M[ok])
    ok &= cond < _COND_LIMIT
    inv = np.full_like(M, np.nan)
    if ok.any():
        inv[ok] = np.linalg.inv(M[ok])
    return inv, ok


def _theta(D, beta, offset):
    th = np.matmul(D, beta[:, :, None])[:, :, 0]
    if offset is not None:
        th = th + offset
    return th


def _loglik(family: ExponentialFamily, y, kw, theta):
    th = family.clamp(theta)
    return np.sum(kw * (y * th - family.b(th)), axis=1) / family.dispersion


def _gram(D, w):
    return np.matmul(np.swapaxes(D * w[:, :, None], 1, 2), D)


def _xtv(D, v):
    return np.matmul(v[:, None, :], D)[:, 0, :]


def solve_batch(D, kw, y, family: ExponentialFamily, opts: SolverOptions,
                init=None, offset=None, guard_rows=None) -> BatchResult:
    """Maximise the local likelihood at every fitting point in the batch.

    ``y`` and ``offset`` have shape ``(n,)`` or ``(m, n)`` (per-point
    windows).  ``guard_rows`` (shape ``(m, k)``) gives the design row of the
    fitting point itself, used to detect degenerate windows; when omitted
    the largest |theta| over the window is used.
    """
    m, n, k = D.shape
    y = np.broadcast_to(np.asarray(y, dtype=float), (m, n))
    if offset is not None:
        offset = np.broadcast_to(np.asarray(offset, dtype=float), (m, n))
    beta = np.zeros((m, k)) if init is None else np.array(init, dtype=float, copy=True)
    iterations = np.zeros(m, dtype=int)
    converged = np.zeros(m, dtype=bool)
    boundary = np.zeros(m, dtype=bool)
    status = np.full(m, OK)
    clamped = np.zeros(m, dtype=bool)
    history: list = []

    npos = np.count_nonzero(kw > 0, axis=1)
    status[npos < k] = INSUFFICIENT

    s0 = _ridged(_gram(D, kw), opts.ridge)
    s0_inv, ok0 = _safe_inv(s0)
    status[(status == OK) & ~ok0] = SINGULAR

    lb = opts.algorithm == "lower_bound"
    if lb and family.kind != "bernoulli":
        raise FamilyMismatchError("the lower-bound algorithm applies to the Bernoulli family only")
    gaussian = family.kind == "gaussian"
    active = np.flatnonzero(status == OK)

    def guard(idx, th):
        if gaussian:
            return np.zeros(len(idx), dtype=bool)
        if guard_rows is not None:
            centre = np.einsum("mk,mk->m", guard_rows[idx], beta[idx])
            return np.abs(centre) > DEGENERATE_THETA
        return np.max(np.where(kw[idx] > 0, np.abs(th), 0.0), axis=1) > DEGENERATE_THETA

    for it in range(opts.max_iterations):
        if active.size == 0:
            break
        Da, kwa, ya = D[active], kw[active], y[active]
        off = None if offset is None else offset[active]
        th = _theta(Da, beta[active], off)
        thc = family.clamp(th)
        mu = family.mean(thc)
        grad = _xtv(Da, kwa * (ya - mu))
        ll0 = np.sum(kwa * (ya * thc - family.b(thc)), axis=1) / family.dispersion

        if lb:
            step = 4.0 * np.einsum("mkl,ml->mk", s0_inv[active], grad)
        else:
            sn = _ridged(_gram(Da, kwa * family.variance(thc)), opts.ridge)
            inv, ok = _safe_inv(sn)
            bad = ~ok
            if bad.any():
                status[active[bad]] = SINGULAR
            step = np.einsum("mkl,ml->mk", np.nan_to_num(inv), grad)
            step[bad] = 0.0

        alpha = np.ones(active.size)
        cand = beta[active] + step
        if opts.step_halving and not (lb or gaussian):
            ll1 = _loglik(family, ya, kwa, _theta(Da, cand, off))
            for _ in range(_MAX_HALVINGS):
                worse = ll1 < ll0 - 1e-12 * (1.0 + np.abs(ll0))
                if not worse.any():
                    break
                alpha[worse] *= 0.5
                cand[worse] = beta[active[worse]] + alpha[worse, None] * step[worse]
                ow = None if off is None else off[worse]
                ll1[worse] = _loglik(family, ya[worse], kwa[worse], _theta(Da[worse], cand[worse], ow))

        if opts.record_history:
            bound = 2.0 * np.einsum("mk,mkl,ml->m", grad, s0_inv[active], grad) if lb else None
            history.append({"index": active.copy(), "loglik": ll0, "grad": grad,
                            "bound": bound, "beta": beta[active].copy()})

        delta = np.max(np.abs(cand - beta[active]), axis=1)
        gnorm = np.max(np.abs(grad), axis=1)
        beta[active] = cand
        iterations[active] += 1
        clamped[active] |= np.any((np.abs(th) > THETA_CLAMP) & (kwa > 0), axis=1)

        done = (delta < opts.tolerance) | (gnorm < opts.grad_tolerance)
        degenerate = guard(active, th) & ~done
        converged[active[done]] = True
        boundary[active[degenerate]] = True
        still = ~(done | degenerate) & (status[active] == OK)
        active = active[still]

    # final quantities at beta_hat
    good = np.flatnonzero(status == OK)
    loglik = np.full(m, np.nan)
    sn_inv = np.full((m, k, k), np.nan)
    if good.size:
        off = None if offset is None else offset[good]
        yg = y[good]
        thc = family.clamp(_theta(D[good], beta[good], off))
        loglik[good] = np.sum(kw[good] * (yg * thc - family.b(thc)), axis=1) / family.dispersion
        sn = _ridged(_gram(D[good], kw[good] * family.variance(thc)), opts.ridge)
        inv, ok = _safe_inv(sn)
        sn_inv[good] = inv
        status[good[~ok]] = SINGULAR
        if opts.record_history:
            gr = _xtv(D[good], kw[good] * (yg - family.mean(thc)))
            history.append({"index": good.copy(), "loglik": loglik[good], "grad": gr,
                            "bound": None, "beta": beta[good].copy()})
    bad = status != OK
    beta[bad] = np.nan
    converged[bad] = False
    return BatchResult(beta, iterations, converged, boundary, status, clamped,
                       loglik, sn_inv, s0_inv, history)


def chunk_slices(m: int, n: int, k: int):
    """Slices of the fitting points so that each design chunk stays small."""
    size = max(1, CHUNK_ELEMENTS // max(1, n * k))
    return [slice(i, min(m, i + size)) for i in range(0, m, size)]


def concat_results(parts) -> BatchResult:
    if len(parts) == 1:
        return parts[0]
    hist = []
    return BatchResult(
        beta=np.concatenate([p.beta for p in parts]),
        iterations=np.concatenate([p.iterations for p in parts]),
        converged=np.concatenate([p.converged for p in parts]),
        boundary=np.concatenate([p.boundary for p in parts]),
        status=np.concatenate([p.status for p in parts]),
        clamped=np.concatenate([p.clamped for p in parts]),
        loglik=np.concatenate([p.loglik for p in parts]),
        sn_inv=np.concatenate([p.sn_inv for p in parts]),
        s0_inv=np.concatenate([p.s0_inv for p in parts]),
        history=hist,
    )


def window_index(x, points, h: float):
    """Indices of the observations within ``h`` of each point (``x`` sorted).

    Returns ``(idx, inside)`` of shape ``(m, W)`` where ``W`` is the widest
    window; padded slots repeat the last index and have ``inside`` False.
    The window is widened by a relative 1e-12 so that the kernel itself
    decides the boundary cases.
    """
    x = np.asarray(x, dtype=float)
    points = np.asarray(points, dtype=float)
    pad = h * (1.0 + 1e-12)
    lo = np.searchsorted(x, points - pad, side="left")
    hi = np.searchsorted(x, points + pad, side="right")
    width = max(1, int(np.max(hi - lo)) if points.size else 1)
    idx = lo[:, None] + np.arange(width)
    inside = idx < hi[:, None]
    return np.minimum(idx, x.size - 1), inside
