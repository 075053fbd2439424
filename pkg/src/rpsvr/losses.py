"""Pointwise losses, the reward-cum-penalty influence function and its noise density.

The reward-cum-penalty (RP) loss of a residual ``u`` is

    max(tau2 * (|u| - eps), tau1 * (|u| - eps))

which is negative (a reward) inside the eps-tube and positive (a penalty)
outside it.  It is convex exactly when ``tau2 >= tau1 >= 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import exprel

from .errors import ValidationError


@dataclass(frozen=True)
class LossParams:
    tau1: float
    tau2: float
    eps: float
    allow_nonconvex: bool = False

    def __post_init__(self):
        if not self.eps > 0:
            raise ValidationError(f"eps must be positive, got {self.eps}")
        if self.allow_nonconvex:
            if self.tau2 < self.tau1:
                raise ValidationError("tau2 must be >= tau1")
            return
        if not (self.tau2 >= self.tau1 >= 0):
            raise ValidationError(
                f"need tau2 >= tau1 >= 0 for a convex loss, got tau1={self.tau1}, tau2={self.tau2}"
            )


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def rp_loss(u, p: LossParams):
    a = np.abs(np.asarray(u, dtype=np.float64)) - p.eps
    return _out(np.maximum(p.tau2 * a, p.tau1 * a))


def eps_insensitive(u, eps: float):
    if eps < 0:
        raise ValidationError("eps must be non-negative")
    return _out(np.maximum(np.abs(np.asarray(u, dtype=np.float64)) - eps, 0.0))


def sign_nonpositive_negative(u):
    """Sign with the convention ``sign(u) = -1`` for ``u <= 0`` and ``+1`` otherwise."""
    return np.where(np.asarray(u) > 0, 1.0, -1.0)


def influence(u, p: LossParams):
    """Derivative of the RP loss: ``tau1*sign(u)`` on ``|u| <= eps``, ``tau2*sign(u)`` beyond."""
    u = np.asarray(u, dtype=np.float64)
    slope = np.where(np.abs(u) <= p.eps, p.tau1, p.tau2)
    return _out(slope * sign_nonpositive_negative(u))


def rp_normalizer(p: LossParams) -> float:
    """``Z = integral of exp(-rp_loss)`` over the real line.

    Z = 2 * ((exp(tau1*eps) - 1) / tau1 + 1 / tau2), with the tau1 -> 0 limit
    2 * (eps + 1 / tau2).  The first term is evaluated as ``eps * exprel(tau1*eps)``
    so it stays accurate for tiny or subnormal tau1.
    """
    if not p.tau2 > 0:
        raise ValidationError("density needs tau2 > 0")
    if p.tau1 < 0:
        raise ValidationError("density needs tau1 >= 0")
    inner = p.eps * float(exprel(p.tau1 * p.eps))
    return 2.0 * (inner + 1.0 / p.tau2)


def rp_density(xi, p: LossParams):
    """Noise density whose negative log-likelihood is the RP loss."""
    return _out(np.exp(-np.asarray(rp_loss(xi, p))) / rp_normalizer(p))


def huber_loss(u, c: float):
    if not c > 0:
        raise ValidationError("huber parameter c must be positive")
    a = np.abs(np.asarray(u, dtype=np.float64))
    return _out(np.where(a < c, a * a / (2.0 * c), a - c / 2.0))


def laplace_loss(u):
    return _out(np.abs(np.asarray(u, dtype=np.float64)))
