"""Training, prediction and introspection of RP-eps-SVR and eps-SVR models.

An eps-SVR is the special case ``tau1 = 0, tau2 = 1`` of the reward-cum-penalty
model, so both go through :func:`fit`.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, ScalingState
from .errors import ValidationError
from .kernels import KernelSpec, cross_kernel, gram
from .qp import (
    DualSolution,
    ReducedDual,
    multipliers,
    recover_bias,
    solve_reference,
    solve_smo,
    split_gamma,
)

ZERO_TOL = 1e-8

SOLVERS = {"smo": solve_smo, "reference": solve_reference}


@dataclass(frozen=True)
class HyperParams:
    C: float
    eps: float
    tau1: float = 0.0
    tau2: float = 1.0
    kernel: KernelSpec = field(default_factory=KernelSpec)

    def __post_init__(self):
        for name in ("C", "eps", "tau1", "tau2"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValidationError(f"{name} must be finite")
            object.__setattr__(self, name, float(v))
        if not self.C > 0:
            raise ValidationError(f"C must be positive, got {self.C}")
        if not self.eps > 0:
            raise ValidationError(f"eps must be positive, got {self.eps}")
        if not (self.tau2 >= self.tau1 >= 0):
            raise ValidationError(
                f"need tau2 >= tau1 >= 0, got tau1={self.tau1}, tau2={self.tau2}"
            )
        if not self.tau2 > 0:
            raise ValidationError("tau2 must be positive")

    @classmethod
    def eps_svr(cls, C, eps, kernel=None) -> "HyperParams":
        return cls(C, eps, 0.0, 1.0, kernel or KernelSpec())

    @property
    def lo(self) -> float:
        return self.tau1 * self.C

    @property
    def hi(self) -> float:
        return self.tau2 * self.C

    @property
    def is_eps_svr(self) -> bool:
        return self.tau1 == 0.0 and self.tau2 == 1.0

    @property
    def degenerate(self) -> bool:
        return self.tau1 == self.tau2

    @property
    def zero_tol(self) -> float:
        return ZERO_TOL * max(1.0, self.hi)

    def to_dict(self) -> dict:
        return {"C": self.C, "eps": self.eps, "tau1": self.tau1, "tau2": self.tau2,
                "kernel": self.kernel.to_dict()}

    @classmethod
    def from_dict(cls, d) -> "HyperParams":
        return cls(d["C"], d["eps"], d.get("tau1", 0.0), d.get("tau2", 1.0),
                   KernelSpec.from_dict(d["kernel"]))


@dataclass(frozen=True, eq=False)
class Model:
    kernel: KernelSpec
    support_points: np.ndarray
    coefficients: np.ndarray
    bias: float
    support_indices: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    params: HyperParams
    n_train: int
    scaling: ScalingState | None = None
    diagnostics: dict = field(default_factory=dict)
    #: full dual solution, available right after fitting (not persisted)
    solution: DualSolution | None = field(default=None, repr=False)

    @property
    def n_support(self) -> int:
        return self.coefficients.shape[0]

    def full_gamma(self) -> np.ndarray:
        """Coefficients for every training point (zeros off the support)."""
        g = np.zeros(self.n_train)
        g[self.support_indices] = self.coefficients
        return g


def _features(data, scaling):
    X = data.features if isinstance(data, Dataset) else np.atleast_2d(np.asarray(data, float))
    return scaling.transform(X) if scaling is not None else X


def build_dual(data: Dataset, hp: HyperParams, scaling: ScalingState | None = None) -> ReducedDual:
    X = _features(data, scaling)
    return ReducedDual(gram(hp.kernel, X), data.targets, hp.eps, hp.lo, hp.hi)


def fit(data: Dataset, hp: HyperParams, *, tol: float = 1e-6, max_iter: int = 10_000_000,
        scaling: ScalingState | None = None, solver: str = "smo") -> Model:
    """Fit a model; ``scaling`` (if given) is applied to the features first and stored.

    With ``tau1 == tau2`` the dual box collapses to a point, every coefficient
    is forced to zero and a constant model is returned with a warning.
    """
    if data.n_samples < 2:
        raise ValidationError("need at least two training points")
    X = _features(data, scaling)
    y = data.targets
    G = gram(hp.kernel, X)
    if hp.degenerate:
        warnings.warn("tau1 == tau2 forces all coefficients to zero; returning a constant model",
                      RuntimeWarning, stacklevel=2)
        # every point is in both bound sets, so b is the midpoint of the KKT interval
        lo = hp.lo
        u = np.full(data.n_samples, lo)
        lower, upper = y - hp.eps, y + hp.eps
        b = 0.5 * (lower.max() + upper.min())
        sol = DualSolution(u, u.copy(), objective=float(2 * hp.eps * lo * len(y)),
                           kkt_residual=0.0, iterations=0, gamma=np.zeros(len(y)),
                           bias=b, solver="degenerate")
        return _assemble(X, sol, hp, scaling, b, np.array([], int), np.array([], int))
    p = ReducedDual(G, y, hp.eps, hp.lo, hp.hi)
    sol = SOLVERS[solver](p, tol=tol, max_iter=max_iter)
    b, s1, s2 = recover_bias(p, sol.u1, sol.u2, G @ sol.gamma)
    return _assemble(X, sol, hp, scaling, b, s1, s2)


def _assemble(X, sol, hp, scaling, b, s1, s2):
    gamma = sol.gamma
    keep = np.flatnonzero(np.abs(gamma) > hp.zero_tol)
    diagnostics = sol.summary()
    diagnostics["sparsity_percent"] = sparsity_percent(sol, hp.zero_tol)
    return Model(
        kernel=hp.kernel,
        support_points=X[keep].copy(),
        coefficients=gamma[keep].copy(),
        bias=float(b),
        support_indices=keep,
        s1=np.asarray(s1, dtype=np.int64),
        s2=np.asarray(s2, dtype=np.int64),
        params=hp,
        n_train=X.shape[0],
        scaling=scaling,
        diagnostics=diagnostics,
        solution=sol,
    )


def compute_bias(solution: DualSolution, data: Dataset, hp: HyperParams,
                 scaling: ScalingState | None = None) -> float:
    """Mean of ``y_i - f0(x_i) - eps`` over S1 and ``y_j - f0(x_j) + eps`` over S2.

    ``f0`` is the regressor without offset.  When both sets are empty the
    midpoint of the interval allowed by the KKT sign conditions is used.
    """
    p = build_dual(data, hp, scaling)
    b, _, _ = recover_bias(p, solution.u1, solution.u2, p.gram @ solution.gamma)
    return b


def predict(m: Model, points) -> np.ndarray:
    """``f(x) = sum_i gamma_i K(x_i, x) + b`` for each row of ``points``."""
    X = _features(points, m.scaling)
    if X.shape[1] != m.support_points.shape[1]:
        raise ValidationError(
            f"model expects {m.support_points.shape[1]} features, got {X.shape[1]}"
        )
    if m.n_support == 0:
        return np.full(X.shape[0], m.bias)
    return cross_kernel(m.kernel, X, m.support_points) @ m.coefficients + m.bias


def sparsity_percent(solution, zero_tol: float = ZERO_TOL) -> float:
    """Percentage of training points whose coefficient ``|gamma_i|`` is at most ``zero_tol``."""
    gamma = solution.gamma if isinstance(solution, DualSolution) else np.asarray(solution)
    if gamma.size == 0:
        return 0.0
    return 100.0 * np.count_nonzero(np.abs(gamma) <= zero_tol) / gamma.size


def primal_objective(gamma, bias, G, y, hp: HyperParams) -> float:
    """Primal value ``1/2 ||w||^2 + C * sum(xi1 + xi2)`` with the tightest feasible slacks."""
    gamma = np.asarray(gamma, dtype=np.float64)
    f = G @ gamma + bias
    r = y - f
    xi1 = np.maximum(hp.tau1 * (r - hp.eps), hp.tau2 * (r - hp.eps))
    xi2 = np.maximum(hp.tau1 * (-r - hp.eps), hp.tau2 * (-r - hp.eps))
    return float(0.5 * gamma @ G @ gamma + hp.C * np.sum(xi1 + xi2))


@dataclass
class Violation:
    index: int
    proposition: int
    detail: str


@dataclass
class PropositionReport:
    n_points: int
    n_inside: int
    n_boundary: int
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def violating_indices(self) -> list[int]:
        return sorted({v.index for v in self.violations})


def verify_propositions(m: Model, data: Dataset, hp: HyperParams | None = None,
                        margin: float = 1e-6) -> PropositionReport:
    """Check the sparsity propositions on the training set ``data``.

    * points off the tube boundary have ``alpha1*beta1 = alpha2*beta2 = 0``;
    * points inside the tube have ``alpha1*beta2 = alpha2*beta1 = 0``;
    * points inside the tube have ``gamma_i = 0``.

    "Inside" means ``|y - f(x)| < eps - margin`` and "on the boundary" means
    ``||y - f(x)| - eps| <= margin``.
    """
    hp = hp or m.params
    if not hp.tau2 > hp.tau1:
        raise ValidationError("propositions need tau2 > tau1")
    if m.n_train != data.n_samples:
        raise ValidationError("data is not the training set of this model")
    r = data.targets - predict(m, data.features)
    gamma = m.full_gamma()
    inside = np.abs(r) < hp.eps - margin
    boundary = np.abs(np.abs(r) - hp.eps) <= margin
    u1, u2 = split_gamma(gamma, hp.lo, hp.hi)
    p = ReducedDual(np.eye(len(gamma)), data.targets, hp.eps, hp.lo, hp.hi)
    mu = multipliers(p, u1, u2)
    prod_tol = ZERO_TOL * max(1.0, hp.hi) ** 2
    report = PropositionReport(len(gamma), int(inside.sum()), int(boundary.sum()))
    for i in np.flatnonzero(~boundary):
        for a, b in (("alpha1", "beta1"), ("alpha2", "beta2")):
            v = mu[a][i] * mu[b][i]
            if abs(v) > prod_tol:
                report.violations.append(Violation(int(i), 1, f"{a}*{b} = {v:.3e} off the boundary"))
    for i in np.flatnonzero(inside):
        for a, b in (("alpha1", "beta2"), ("alpha2", "beta1")):
            v = mu[a][i] * mu[b][i]
            if abs(v) > prod_tol:
                report.violations.append(Violation(int(i), 2, f"{a}*{b} = {v:.3e} inside the tube"))
        if abs(gamma[i]) > hp.zero_tol:
            report.violations.append(
                Violation(int(i), 3, f"gamma = {gamma[i]:.3e} inside the tube (residual {r[i]:.3e})")
            )
    return report


def model_to_dict(m: Model) -> dict:
    return {
        "format": "rpsvr-model",
        "version": 1,
        "kernel": m.kernel.to_dict(),
        "params": m.params.to_dict(),
        "scaling": m.scaling.to_dict() if m.scaling is not None else None,
        "n_train": m.n_train,
        "n_features": int(m.support_points.shape[1]),
        "bias": m.bias,
        "support_indices": m.support_indices.tolist(),
        "support_points": m.support_points.tolist(),
        "coefficients": m.coefficients.tolist(),
        "s1": m.s1.tolist(),
        "s2": m.s2.tolist(),
        "diagnostics": m.diagnostics,
    }


def model_from_dict(d) -> Model:
    if d.get("format") != "rpsvr-model":
        raise ValidationError("not an rpsvr model file")
    params = HyperParams.from_dict(d["params"])
    pts = np.array(d["support_points"], dtype=np.float64)
    if pts.size == 0:
        pts = pts.reshape(0, int(d.get("n_features", 0)))
    return Model(
        kernel=KernelSpec.from_dict(d["kernel"]),
        support_points=pts,
        coefficients=np.array(d["coefficients"], dtype=np.float64),
        bias=float(d["bias"]),
        support_indices=np.array(d["support_indices"], dtype=np.int64),
        s1=np.array(d["s1"], dtype=np.int64),
        s2=np.array(d["s2"], dtype=np.int64),
        params=params,
        n_train=int(d["n_train"]),
        scaling=ScalingState.from_dict(d["scaling"]) if d.get("scaling") else None,
        diagnostics=dict(d.get("diagnostics", {})),
    )


def save_model(m: Model, path) -> None:
    """Write the model as JSON; floats are written with ``repr`` and round-trip exactly."""
    Path(path).write_text(json.dumps(model_to_dict(m), indent=1) + "\n")


def load_model(path) -> Model:
    return model_from_dict(json.loads(Path(path).read_text()))
