"""Adaptive Simpson quadrature."""

from __future__ import annotations

import math
import warnings
from collections import deque

__all__ = ["adaptive_simpson"]

_EPS = 2.0**-52


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-10, max_depth: int = 50,
                     min_depth: int = 4, max_evals: int = 200_000) -> float:
    """Integrate ``f`` over ``[a, b]`` by adaptive Simpson's rule.

    Each panel is split until the Richardson error estimate
    ``|S_left + S_right - S_whole| / 15`` falls below its share of ``tol``.
    The first ``min_depth`` levels are always split so that narrow
    features are not missed by the initial five-point sample.  A noisy
    integrand (finite-difference derivatives, say) can never meet a tight
    ``tol``; after ``max_evals`` evaluations the remaining panels are
    accepted as they stand and a ``RuntimeWarning`` is issued.
    """
    if a == b:
        return 0.0
    if b < a:
        return -adaptive_simpson(f, b, a, tol, max_depth, min_depth, max_evals)

    fa, fb, fm = f(a), f(b), f((a + b) / 2)
    if not (math.isfinite(fa) and math.isfinite(fb) and math.isfinite(fm)):
        raise FloatingPointError("integrand produced a non-finite value")
    whole = (b - a) / 6 * (fa + 4 * fm + fb)
    # breadth-first queue, so an exhausted budget leaves panels of uniform depth
    # entries: (a, b, fa, fm, fb, whole, tol, depth)
    queue = deque([(a, b, fa, fm, fb, whole, tol, 0)])
    total = 0.0
    evals, exhausted = 3, False
    while queue:
        lo, hi, flo, fmid, fhi, est, eps, depth = queue.popleft()
        mid = (lo + hi) / 2
        lm, rm = (lo + mid) / 2, (mid + hi) / 2
        flm, frm = f(lm), f(rm)
        evals += 2
        if not (math.isfinite(flm) and math.isfinite(frm)):
            raise FloatingPointError(f"integrand produced a non-finite value near {mid:.6g}")
        left = (mid - lo) / 6 * (flo + 4 * flm + fmid)
        right = (hi - mid) / 6 * (fmid + 4 * frm + fhi)
        delta = left + right - est
        # the last clause stops splitting once delta is at rounding level
        if evals >= max_evals and depth >= min_depth:
            exhausted = True
        if exhausted or (depth >= min_depth and (abs(delta) <= 15 * eps or depth >= max_depth
                                                 or abs(delta) <= 64 * _EPS * (abs(left) + abs(right)))):
            total += left + right + delta / 15
        else:
            queue.append((lo, mid, flo, flm, fmid, left, eps / 2, depth + 1))
            queue.append((mid, hi, fmid, frm, fhi, right, eps / 2, depth + 1))
    if exhausted:
        warnings.warn(f"adaptive Simpson stopped after {evals} evaluations without reaching tol={tol:g}",
                      RuntimeWarning, stacklevel=2)
    return total
