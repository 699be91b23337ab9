"""Bregman q-class error measures.

A concave function ``q`` on the mean space generates the divergence

    Q(y, m) = q(m) + q'(m) (y - m) - q(y),

which is non-negative and vanishes at ``m = y``.  The kinds provided are

``quadratic``
    ``q(m) = -m**2``; ``Q = (y - m)**2``.
``deviance``
    ``q(m) = 2 {b(theta) - m theta}`` with ``b'(theta) = m``; ``Q`` is the
    deviance of the attached family.
``exploss``
    ``q(m) = 2 sqrt(m (1 - m))``; for binary ``y`` this is the AdaBoost
    exponential loss ``sqrt((1 - m)/m)`` at ``y = 1``.
``misclass``
    ``q(m) = min(m, 1 - m)``; ``Q = I{y != I(m > .5)}``.
``hinge``
    ``q(m) = min(m, 1 - m) / 2``.

The last two are piecewise linear: ``q''`` vanishes away from the kink at
``m = .5`` and they cannot drive the curvature-based criteria.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError
from .family import ExponentialFamily, get_family

__all__ = [
    "BregmanDivergence",
    "MEAN_CLIP",
    "get_divergence",
    "q_eval",
    "loss",
    "loss_curve_points",
    "clip_mean",
]

#: Clip distance from {0, 1} applied to fitted Bernoulli means.
MEAN_CLIP = 1e-12

_TOKENS = {
    "quadratic": "quadratic",
    "deviance": "deviance",
    "exploss": "exploss",
    "exponential": "exploss",
    "exponential_binary": "exploss",
    "misclass": "misclass",
    "misclassification": "misclass",
    "hinge": "hinge",
}
_BINARY_KINDS = ("exploss", "misclass", "hinge")


@dataclass(frozen=True)
class BregmanDivergence:
    """A member of the q-class.

    ``family`` is required for ``deviance`` and ignored otherwise.
    """

    kind: str
    family: ExponentialFamily | None = None

    def __post_init__(self):
        if self.kind not in _TOKENS.values():
            raise ValueError(f"unknown divergence {self.kind!r}")
        if self.kind == "deviance" and self.family is None:
            raise ValueError("deviance divergence needs a family")
        if self.kind != "deviance" and self.family is not None:
            object.__setattr__(self, "family", None)

    @property
    def has_curvature(self) -> bool:
        return self.kind not in ("misclass", "hinge")

    @property
    def binary(self) -> bool:
        return self.kind in _BINARY_KINDS or (
            self.kind == "deviance" and self.family.kind == "bernoulli"
        )

    @property
    def token(self) -> str:
        return self.kind

    # vectorised internals ------------------------------------------------

    def _mean_ok(self, m):
        if self.kind == "quadratic":
            return np.isfinite(m)
        if self.kind == "deviance":
            return self.family.in_mean_space(m)
        return (m > 0) & (m < 1)

    def q_parts(self, m):
        """``(q, q', q'')`` for interior means, without checks."""
        m = np.asarray(m, dtype=float)
        if self.kind == "quadratic":
            return -m**2, -2.0 * m, np.full_like(m, -2.0)
        if self.kind == "deviance":
            fam = self.family
            theta = fam.link(m)
            q = 2.0 * (fam.b(theta) - m * theta)
            return q, -2.0 * theta, -2.0 / fam.variance(theta)
        if self.kind == "exploss":
            v = m * (1.0 - m)
            s = np.sqrt(v)
            return 2.0 * s, (1.0 - 2.0 * m) / s, -0.5 * v**-1.5
        scale = 1.0 if self.kind == "misclass" else 0.5
        q = scale * np.minimum(m, 1.0 - m)
        q1 = scale * np.where(m < 0.5, 1.0, -1.0)
        return q, q1, np.zeros_like(m)

    def q2(self, m):
        """``q''(m)`` only (vectorised)."""
        m = np.asarray(m, dtype=float)
        if self.kind == "deviance":
            return -2.0 / self.family.variance(self.family.link(m))
        return self.q_parts(m)[2]

    def q_at_response(self, y):
        """``q(y)`` including the finite boundary limits."""
        y = np.asarray(y, dtype=float)
        if self.kind == "quadratic":
            return -y**2
        if self.kind == "deviance":
            kind = self.family.kind
            if kind == "gaussian":
                return -y**2
            if kind == "poisson":
                ylogy = np.where(y > 0, y * np.log(np.where(y > 0, y, 1.0)), 0.0)
                return 2.0 * (y - ylogy)
            inner = np.where((y > 0) & (y < 1), y, 0.5)
            ent = inner * np.log(inner) + (1 - inner) * np.log1p(-inner)
            return np.where((y > 0) & (y < 1), -2.0 * ent, 0.0)
        if self.kind == "exploss":
            return 2.0 * np.sqrt(np.clip(y * (1.0 - y), 0.0, None))
        scale = 1.0 if self.kind == "misclass" else 0.5
        return scale * np.minimum(y, 1.0 - y)

    def check_response(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "deviance":
            return self.family.check_response(y)
        if self.kind == "exploss":
            if np.any((y < 0) | (y > 1)):
                raise DomainError("exponential loss needs responses in [0, 1]")
        elif self.kind in ("misclass", "hinge"):
            if np.any((y != 0) & (y != 1)):
                raise DomainError(f"{self.kind} loss needs binary responses")
        elif not np.all(np.isfinite(y)):
            raise DomainError("responses must be finite")
        return y

    def losses(self, y, m_hat):
        """Elementwise ``Q(y, m_hat)``; assumes interior means and valid ``y``."""
        q, q1, _ = self.q_parts(m_hat)
        return np.maximum(q + q1 * (y - m_hat) - self.q_at_response(y), 0.0)


def get_divergence(div, family=None) -> BregmanDivergence:
    """Coerce a token (``"quadratic"``, ``"deviance"``, ...) to a divergence."""
    if isinstance(div, BregmanDivergence):
        return div
    token = _TOKENS.get(str(div).lower())
    if token is None:
        raise ValueError(f"unknown divergence {div!r}")
    fam = get_family(family) if (token == "deviance" and family is not None) else None
    return BregmanDivergence(token, fam)


def clip_mean(div: BregmanDivergence, m_hat):
    """Clip fitted means to the interior; returns ``(clipped, n_clipped)``.

    Only binary-mean divergences are clipped (to ``[eps, 1 - eps]``); a
    Poisson mean is floored at ``eps``.
    """
    m_hat = np.asarray(m_hat, dtype=float)
    if div.kind == "quadratic" or (div.kind == "deviance" and div.family.kind == "gaussian"):
        return m_hat, 0
    if div.kind == "deviance" and div.family.kind == "poisson":
        out = np.maximum(m_hat, MEAN_CLIP)
    else:
        out = np.clip(m_hat, MEAN_CLIP, 1.0 - MEAN_CLIP)
    return out, int(np.count_nonzero(out != m_hat))


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def _check_kink(div, m):
    if div.kind in ("misclass", "hinge") and np.any(m == 0.5):
        raise DomainError(f"{div.kind} q-function has a kink at m = 0.5")


def q_eval(div, m):
    """Return ``(q(m), q'(m), q''(m))`` at an interior mean ``m``."""
    div = get_divergence(div)
    m = np.asarray(m, dtype=float)
    if not np.all(div._mean_ok(m)):
        raise DomainError("mean outside the interior of the mean space")
    _check_kink(div, m)
    return tuple(_out(v) for v in div.q_parts(m))


def loss(div, y, m_hat, clip: bool = False):
    """Bregman divergence ``Q(y, m_hat)``.

    With ``clip=True`` fitted means on (or numerically at) the boundary are
    pulled inside first; otherwise a boundary mean raises
    :class:`DomainError`.
    """
    div = get_divergence(div)
    y = div.check_response(y)
    m_hat = np.asarray(m_hat, dtype=float)
    if clip:
        m_hat, _ = clip_mean(div, m_hat)
    if not np.all(div._mean_ok(m_hat)):
        raise DomainError("fitted mean on the boundary of the mean space")
    _check_kink(div, m_hat)
    return _out(div.losses(y, m_hat))


def _margin_value(kind: str, v):
    v = np.asarray(v, dtype=float)
    if kind == "quadratic":
        return (1.0 - v) ** 2
    if kind == "deviance":
        return np.logaddexp(0.0, -v) / np.log(2.0)
    if kind == "exploss":
        return np.exp(-0.5 * v)
    if kind == "hinge":
        return np.maximum(1.0 - v, 0.0)
    return (v <= 0).astype(float)


def loss_curve_points(div, margins):
    """Margin view ``V(y* F)`` of a binary loss, scaled to pass ``(0, 1)``.

    The margin is ``y* F`` with ``y* = 2y - 1``.  ``F = logit(m)`` for the
    deviance and exponential losses, ``F = 2m - 1`` for the quadratic loss
    and ``F = sign(m - .5)`` for hinge and misclassification.

    Returns an array of shape ``(len(margins), 2)`` with columns
    (margin, value).
    """
    div = get_divergence(div)
    if div.kind == "deviance" and div.family.kind != "bernoulli":
        raise ValueError("margin view needs a binary-response divergence")
    margins = np.asarray(margins, dtype=float).ravel()
    return np.column_stack([margins, _margin_value(div.kind, margins)])
