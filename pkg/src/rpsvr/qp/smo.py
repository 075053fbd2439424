"""Pairwise working-set solver on the coefficients ``gamma = u1 - u2``.

At fixed ``gamma`` the cheapest split is ``u1 + u2 = |gamma| + 2*lo`` because
the ``eps * e'(u1+u2)`` term only grows with the sum.  The problem becomes

    min 1/2 g'Gg - g'y + eps*||g||_1    s.t.  sum(g) = 0,  |g_i| <= hi - lo

Each step moves ``t`` units of mass from ``gamma_j`` to ``gamma_i`` and
minimises the resulting one-dimensional piecewise quadratic exactly, including
its kinks at ``gamma = 0``.  ``i`` is the maximal violator; ``j`` maximises the
second-order gain ``gap^2 / eta`` among its partners.
"""

from __future__ import annotations

import json
import logging
import math

import numpy as np

from ..errors import ConvergenceError
from .problem import ReducedDual, finalize, split_gamma

log = logging.getLogger(__name__)

#: curvature used when a pair has ``K_ii + K_jj - 2 K_ij <= 0``
MIN_CURVATURE = 1e-10


def _violators(gamma, resid, eps, C):
    """Offsets implied by moving each coordinate up (``up``) or down (``down``)."""
    up = resid - np.where(gamma >= 0.0, eps, -eps)
    up[gamma >= C] = -np.inf
    down = resid - np.where(gamma > 0.0, eps, -eps)
    down[gamma <= -C] = np.inf
    return up, down


def _pair_step(gi, gj, slope0, eta, eps, C):
    """Exact minimiser ``t`` of the pair objective on ``[0, T]`` and the new values."""
    T = min(C - gi, gj + C)
    kinks = sorted(k for k in ((-gi) if gi < 0 else None, gj if gj > 0 else None)
                   if k is not None and 0.0 < k < T)
    edges = [0.0, *kinks, T]
    t = T
    for a, c in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (a + c)
        s = slope0 + eps * math.copysign(1.0, gi + mid) - eps * math.copysign(1.0, gj - mid)
        t = min(max(-s / eta, a), c)
        if t < c:
            break
    new_i = gi + t
    new_j = gj - t
    if t == -gi:
        new_i = 0.0
    if t == gj:
        new_j = 0.0
    if t == T:
        if T == C - gi:
            new_i = C
        if T == gj + C:
            new_j = -C
    return t, new_i, new_j


WORKING_SETS = ("second-order", "max-violating")


def solve_smo(p: ReducedDual, tol: float = 1e-6, max_iter: int = 10_000_000,
              record_objective: bool = False, trace=None, working_set: str = "second-order"):
    """Solve the reduced dual; stops once the maximal KKT violation is ``<= tol``.

    ``working_set="max-violating"`` pairs the maximal violator with the minimal
    one instead of using the second-order rule; ties go to the lowest index
    either way.

    ``record_objective`` stores the full objective after every step in
    ``solution.extras["objective_trace"]`` and ``sum(gamma)`` in
    ``extras["equality_trace"]`` (O(l^2) per step, for testing).
    ``trace`` is an optional path; one JSON line per step is written there.

    Raises ConvergenceError carrying the partial solution when ``max_iter``
    steps were not enough.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if working_set not in WORKING_SETS:
        raise ValueError(f"working_set must be one of {WORKING_SETS}")
    second_order = working_set == "second-order"
    G = p.gram
    y = p.targets
    eps = p.eps
    C = p.width
    l = p.size
    diag = np.diag(G).copy()
    gamma = np.zeros(l)
    f0 = np.zeros(l)
    history = [p.objective_gamma(gamma)] if record_objective else None
    sums = [0.0] if record_objective else None
    sink = open(trace, "w") if trace is not None else None
    warned = False
    it = 0
    refreshed = False
    viol = 0.0
    try:
        while True:
            resid = y - f0
            up, down = _violators(gamma, resid, eps, C)
            i = int(np.argmax(up))
            viol = float(up[i] - down.min()) if l > 1 else 0.0
            if viol <= tol:
                if refreshed:
                    break
                # recompute f0 from scratch to shed accumulated rounding
                f0 = G @ gamma
                refreshed = True
                continue
            refreshed = False
            if it >= max_iter:
                u1, u2 = split_gamma(gamma, p.lo, p.hi)
                sol = finalize(p, u1, u2, it, "smo", gamma=gamma.copy(), converged=False)
                raise ConvergenceError(f"smo stopped after {it} steps", viol, sol)
            if second_order:
                # largest predicted decrease gap^2 / eta among partners of i
                gap = up[i] - down
                etas = np.maximum(diag[i] + diag - 2.0 * G[i], MIN_CURVATURE)
                gain = np.where(gap > 0.0, gap * gap / etas, -np.inf)
                gain[i] = -np.inf
                j = int(np.argmax(gain))
            else:
                j = int(np.argmin(down))
            eta = G[i, i] + G[j, j] - 2.0 * G[i, j]
            if eta <= 0.0:
                if not warned:
                    log.debug("non-positive pair curvature %.3e at (%d, %d); using %.0e",
                              eta, i, j, MIN_CURVATURE)
                    warned = True
                eta = MIN_CURVATURE
            slope0 = resid[j] - resid[i]
            t, new_i, new_j = _pair_step(gamma[i], gamma[j], slope0, eta, eps, C)
            di = new_i - gamma[i]
            dj = new_j - gamma[j]
            gamma[i] = new_i
            gamma[j] = new_j
            f0 += di * G[i] + dj * G[j]
            it += 1
            if history is not None:
                history.append(p.objective_gamma(gamma))
                sums.append(float(gamma.sum()))
            if sink is not None:
                sink.write(json.dumps({"iter": it, "i": i, "j": j, "step": t,
                                       "violation": viol}) + "\n")
    finally:
        if sink is not None:
            sink.close()
    u1, u2 = split_gamma(gamma, p.lo, p.hi)
    extras = {"violation": viol}
    if history is not None:
        extras["objective_trace"] = history
        extras["equality_trace"] = sums
    return finalize(p, u1, u2, it, "smo", gamma=gamma, extras=extras)
