"""Slow reference solver working directly on the 2l box variables ``(u1, u2)``.

Pairs of box variables are updated so that ``e'(u1 - u2)`` stays zero; the
objective along each pair direction is a smooth quadratic that is minimised
and clipped to the box.  Unlike :func:`solve_smo` nothing ties ``u1 + u2``
to ``|gamma|``; the linear ``eps`` term has to drive that on its own.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConvergenceError
from .problem import ReducedDual, finalize


def solve_reference(p: ReducedDual, tol: float = 1e-6, max_iter: int = 2_000_000):
    if not tol > 0:
        raise ValueError("tol must be positive")
    G = p.gram
    y = p.targets
    eps = p.eps
    lo, hi = p.lo, p.hi
    l = p.size
    v = np.full(2 * l, lo)           # [u1; u2]
    sign = np.concatenate([np.ones(l), -np.ones(l)])
    point = np.concatenate([np.arange(l), np.arange(l)])
    f0 = np.zeros(l)
    it = 0
    gap = 0.0
    refreshed = False
    while True:
        e = y - f0
        # -sign * gradient for every box variable
        score = np.concatenate([e - eps, e + eps])
        at_lo = v <= lo
        at_hi = v >= hi
        can_up = np.where(sign > 0, ~at_hi, ~at_lo)
        can_down = np.where(sign > 0, ~at_lo, ~at_hi)
        s_up = np.where(can_up, score, -np.inf)
        s_down = np.where(can_down, score, np.inf)
        i = int(np.argmax(s_up))
        j = int(np.argmin(s_down))
        gap = float(s_up[i] - s_down[j])
        if gap <= tol:
            if refreshed:
                break
            f0 = G @ (v[:l] - v[l:])
            refreshed = True
            continue
        refreshed = False
        if it >= max_iter:
            sol = finalize(p, v[:l].copy(), v[l:].copy(), it, "reference", converged=False)
            raise ConvergenceError(f"reference solver stopped after {it} steps", gap, sol)
        ki, kj = point[i], point[j]
        eta = max(G[ki, ki] + G[kj, kj] - 2.0 * G[ki, kj], 1e-12)
        room_i = hi - v[i] if sign[i] > 0 else v[i] - lo
        room_j = v[j] - lo if sign[j] > 0 else hi - v[j]
        t = min(gap / eta, room_i, room_j)
        v[i] += sign[i] * t
        v[j] -= sign[j] * t
        if t == room_i:
            v[i] = hi if sign[i] > 0 else lo
        if t == room_j:
            v[j] = lo if sign[j] > 0 else hi
        # gamma[ki] grows by t and gamma[kj] shrinks by t
        if ki != kj:
            f0 += t * (G[ki] - G[kj])
        it += 1
    return finalize(p, v[:l], v[l:], it, "reference", extras={"violation": gap})
