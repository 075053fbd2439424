"""Reduced dual of the reward-cum-penalty SVR and helpers shared by all solvers.

The 4l-variable dual has per-point equalities ``C - a1/tau1 - b1/tau2 = 0``
(and the same for side 2).  Writing ``u1 = a1 + b1`` and ``u2 = a2 + b2``
maps its feasible set one-to-one onto the box ``u1, u2 in [lo, hi]`` with
``lo = tau1*C`` and ``hi = tau2*C``, and turns the objective into

    1/2 (u1-u2)' G (u1-u2) - (u1-u2)' y + eps * e'(u1+u2)

subject to ``e'(u1-u2) = 0``.  The original multipliers come back as

    a1 = lo*(hi-u1)/(hi-lo),   b1 = hi*(u1-lo)/(hi-lo)

which involves no division by tau1, so the eps-SVR case (lo = 0) needs no
special handling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError

#: Relative width of the band around lo/hi treated as "at the bound".
INTERIOR_MARGIN = 1e-8


@dataclass(frozen=True, eq=False)
class ReducedDual:
    gram: np.ndarray
    targets: np.ndarray
    eps: float
    lo: float
    hi: float

    def __post_init__(self):
        G = np.array(self.gram, dtype=np.float64)
        y = np.array(self.targets, dtype=np.float64).reshape(-1)
        if G.ndim != 2 or G.shape[0] != G.shape[1] or G.shape[0] != y.shape[0]:
            raise ValidationError(f"gram {G.shape} does not match {y.shape[0]} targets")
        if not np.all(np.isfinite(G)):
            raise ValidationError("gram matrix has non-finite entries")
        if not np.all(np.isfinite(y)):
            raise ValidationError("targets have non-finite entries")
        scale = max(1.0, float(np.abs(G).max(initial=0.0)))
        if np.abs(G - G.T).max(initial=0.0) > 1e-10 * scale:
            raise ValidationError("gram matrix is not symmetric")
        G = 0.5 * (G + G.T)
        if not self.eps > 0:
            raise ValidationError(f"eps must be positive, got {self.eps}")
        if not (self.hi > self.lo >= 0):
            raise ValidationError(f"need hi > lo >= 0, got lo={self.lo}, hi={self.hi}")
        G.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "gram", G)
        object.__setattr__(self, "targets", y)
        object.__setattr__(self, "eps", float(self.eps))
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))

    @classmethod
    def from_params(cls, gram, targets, eps, C, tau1, tau2) -> "ReducedDual":
        return cls(gram, targets, eps, tau1 * C, tau2 * C)

    @property
    def size(self) -> int:
        return self.targets.shape[0]

    @property
    def width(self) -> float:
        """Box width ``hi - lo``; bounds ``|gamma_i|`` at the optimum."""
        return self.hi - self.lo

    def objective(self, u1, u2) -> float:
        gamma = np.asarray(u1) - np.asarray(u2)
        return float(
            0.5 * gamma @ (self.gram @ gamma)
            - gamma @ self.targets
            + self.eps * np.sum(np.asarray(u1) + np.asarray(u2))
        )

    def objective_gamma(self, gamma) -> float:
        """Objective at the minimal-sum split ``u1 + u2 = |gamma| + 2*lo``."""
        gamma = np.asarray(gamma, dtype=np.float64)
        return float(
            0.5 * gamma @ (self.gram @ gamma)
            - gamma @ self.targets
            + self.eps * (np.abs(gamma).sum() + 2.0 * self.lo * gamma.shape[0])
        )


def split_gamma(gamma, lo, hi=None):
    """Minimal-sum ``(u1, u2)`` with ``u1 - u2 = gamma``.

    With ``hi`` given the result is clamped to it, absorbing the rounding of
    ``lo + (hi - lo)`` at a bound.
    """
    gamma = np.asarray(gamma, dtype=np.float64)
    u1 = lo + np.maximum(gamma, 0.0)
    u2 = lo + np.maximum(-gamma, 0.0)
    if hi is not None:
        u1 = np.minimum(u1, hi)
        u2 = np.minimum(u2, hi)
    return u1, u2


@dataclass(eq=False)
class DualSolution:
    u1: np.ndarray
    u2: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    gamma: np.ndarray | None = None
    bias: float = 0.0
    converged: bool = True
    solver: str = ""
    #: extra per-solver data, e.g. the recovered 4l multipliers
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.gamma is None:
            self.gamma = np.asarray(self.u1) - np.asarray(self.u2)

    def summary(self) -> dict:
        return {
            "solver": self.solver,
            "objective": self.objective,
            "kkt_residual": self.kkt_residual,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def multipliers(p: ReducedDual, u1, u2) -> dict:
    """Recover ``alpha1, alpha2, beta1, beta2`` of the 4l-variable dual."""
    u1 = np.asarray(u1, dtype=np.float64)
    u2 = np.asarray(u2, dtype=np.float64)
    w = p.hi - p.lo
    return {
        "alpha1": p.lo * ((p.hi - u1) / w),
        "beta1": p.hi * ((u1 - p.lo) / w),
        "alpha2": p.lo * ((p.hi - u2) / w),
        "beta2": p.hi * ((u2 - p.lo) / w),
    }


def interior_sets(p: ReducedDual, u1, u2):
    """Index sets S1, S2 of points whose u1 (resp. u2) lies strictly inside the box."""
    d = INTERIOR_MARGIN * p.width
    u1 = np.asarray(u1)
    u2 = np.asarray(u2)
    s1 = np.flatnonzero((u1 > p.lo + d) & (u1 < p.hi - d))
    s2 = np.flatnonzero((u2 > p.lo + d) & (u2 < p.hi - d))
    return s1, s2


def bias_interval(p: ReducedDual, u1, u2, f0):
    """Interval of offsets ``b`` consistent with the KKT sign conditions.

    Each point contributes ``y - f0 - eps`` or ``y - f0 + eps`` as a lower or
    upper bound depending on which of its variables can still move.
    """
    d = INTERIOR_MARGIN * p.width
    e = p.targets - f0
    lower = np.concatenate([(e - p.eps)[u1 < p.hi - d], (e + p.eps)[u2 > p.lo + d]])
    upper = np.concatenate([(e - p.eps)[u1 > p.lo + d], (e + p.eps)[u2 < p.hi - d]])
    lo_b = lower.max() if lower.size else -np.inf
    hi_b = upper.min() if upper.size else np.inf
    return lo_b, hi_b


def recover_bias(p: ReducedDual, u1, u2, f0=None):
    """Average the offsets implied by interior points; fall back to the interval midpoint.

    Returns ``(b, s1, s2)``.
    """
    u1 = np.asarray(u1, dtype=np.float64)
    u2 = np.asarray(u2, dtype=np.float64)
    if f0 is None:
        f0 = p.gram @ (u1 - u2)
    s1, s2 = interior_sets(p, u1, u2)
    e = p.targets - f0
    if s1.size or s2.size:
        est = np.concatenate([e[s1] - p.eps, e[s2] + p.eps])
        return float(est.mean()), s1, s2
    lo_b, hi_b = bias_interval(p, u1, u2, f0)
    if np.isfinite(lo_b) and np.isfinite(hi_b):
        b = 0.5 * (lo_b + hi_b)
    elif np.isfinite(lo_b):
        b = lo_b
    elif np.isfinite(hi_b):
        b = hi_b
    else:
        b = 0.0
    return float(b), s1, s2


def kkt_residual(p: ReducedDual, s: DualSolution, bias: float | None = None) -> float:
    """Largest violation of the optimality conditions at ``s``.

    Covers box feasibility, the equality ``e'(u1-u2) = 0`` and complementary
    slackness of the four tube constraints with the slacks taken tight.  The
    complementarity products reduce to, e.g. for side 1,

        alpha1 * slack = (hi-u1) * max(0, r-eps)
        beta1  * slack = (u1-lo) * max(0, eps-r)

    with ``r = y - f(x)``; they are divided by ``hi - lo`` so the result is in
    units of the residual.
    """
    u1 = np.asarray(s.u1, dtype=np.float64)
    u2 = np.asarray(s.u2, dtype=np.float64)
    box = max(
        0.0,
        float(np.max(p.lo - u1, initial=0.0)),
        float(np.max(u1 - p.hi, initial=0.0)),
        float(np.max(p.lo - u2, initial=0.0)),
        float(np.max(u2 - p.hi, initial=0.0)),
    )
    gamma = s.gamma if s.gamma is not None else u1 - u2
    eq = abs(float(np.sum(gamma)))
    f0 = p.gram @ gamma
    if bias is None:
        bias, _, _ = recover_bias(p, u1, u2, f0)
    r = p.targets - f0 - bias
    w = p.width
    u1c = np.clip(u1, p.lo, p.hi)
    u2c = np.clip(u2, p.lo, p.hi)
    comp = np.concatenate([
        (p.hi - u1c) * np.maximum(0.0, r - p.eps),
        (u1c - p.lo) * np.maximum(0.0, p.eps - r),
        (p.hi - u2c) * np.maximum(0.0, -r - p.eps),
        (u2c - p.lo) * np.maximum(0.0, p.eps + r),
    ]) / w
    return max(box, eq, float(comp.max(initial=0.0)))


def finalize(p: ReducedDual, u1, u2, iterations, solver, gamma=None, converged=True, extras=None):
    """Build a DualSolution with objective, bias and residual filled in."""
    u1 = np.asarray(u1, dtype=np.float64)
    u2 = np.asarray(u2, dtype=np.float64)
    if gamma is None:
        gamma = u1 - u2
    f0 = p.gram @ gamma
    b, _, _ = recover_bias(p, u1, u2, f0)
    sol = DualSolution(
        u1=u1,
        u2=u2,
        objective=p.objective(u1, u2),
        kkt_residual=0.0,
        iterations=int(iterations),
        gamma=np.asarray(gamma, dtype=np.float64),
        bias=b,
        converged=converged,
        solver=solver,
        extras=extras or {},
    )
    sol.kkt_residual = kkt_residual(p, sol, bias=b)
    return sol
