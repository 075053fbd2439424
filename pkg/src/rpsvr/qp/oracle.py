"""Brute-force oracle on the original 4l-variable dual.

Each point's equality ``C - alpha1/tau1 - beta1/tau2 = 0`` pins ``beta1`` once
``alpha1 in [0, tau1*C]`` is chosen, so the dual is a box-plus-one-equality QP
in ``(alpha1, alpha2)``.  It is solved by accelerated projected gradient with an
exact projection, then polished by solving the equality-constrained system on
the identified free set.  Meant for l <= 20; it exists to validate the
reduction used by the fast solvers.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConvergenceError, ValidationError
from .problem import ReducedDual, finalize


def project_box_hyperplane(z, c, upper):
    """Euclidean projection of ``z`` onto ``{x : 0 <= x <= upper, c'x = 0}`` for ``c in {+1,-1}``."""
    bps = np.unique(np.concatenate([z * c, (z - upper) * c]))
    X = np.clip(z[None, :] - bps[:, None] * c[None, :], 0.0, upper)
    h = X @ c  # non-increasing in the multiplier
    if h[0] < 0 or h[-1] > 0:
        raise ValidationError("projection target set is empty")
    k = int(np.searchsorted(-h, 0.0, side="left"))
    if h[k] == 0.0:
        return X[k]
    lo_nu, hi_nu = bps[k - 1], bps[k]
    h_lo, h_hi = h[k - 1], h[k]
    nu = lo_nu + h_lo * (hi_nu - lo_nu) / (h_lo - h_hi)
    x = np.clip(z - nu * c, 0.0, upper)
    return x


def _verbatim(G, y, eps, C, tau1, tau2, a1, a2):
    b1 = tau2 * (C - a1 / tau1)
    b2 = tau2 * (C - a2 / tau1)
    d = a1 - a2 + b1 - b2
    obj = 0.5 * d @ G @ d - d @ y + eps * np.sum(a1 + a2 + b1 + b2)
    return float(obj), b1, b2


def _polish(H, q, c, upper, x, tol):
    """Solve the QP exactly on the free set suggested by ``x``; None if inconsistent."""
    n = x.shape[0]
    band = 1e-7 * upper
    at_lo = x <= band
    at_hi = x >= upper - band
    free = ~(at_lo | at_hi)
    xb = np.where(at_hi, upper, 0.0)
    nf = int(free.sum())
    K = np.zeros((nf + 1, nf + 1))
    K[:nf, :nf] = H[np.ix_(free, free)]
    K[:nf, nf] = c[free]
    K[nf, :nf] = c[free]
    rhs = np.empty(nf + 1)
    rhs[:nf] = -(q[free] + H[np.ix_(free, ~free)] @ xb[~free])
    rhs[nf] = -(c[~free] @ xb[~free])
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    out = xb.copy()
    out[free] = sol[:nf]
    nu = sol[nf]
    if np.any(out < -1e-12 * upper) or np.any(out > upper * (1 + 1e-12)):
        return None
    out = np.clip(out, 0.0, upper)
    g = H @ out + q + nu * c
    scale = 1.0 + np.abs(q).max()
    if np.any(g[at_lo] < -tol * scale) or np.any(g[at_hi] > tol * scale):
        return None
    if np.abs(g[free]).max(initial=0.0) > tol * scale:
        return None
    return out


def solve_full_oracle(gram, targets, eps, C, tau1, tau2, tol=1e-10, max_iter=200_000):
    """Minimise the 4l-variable dual over ``alpha1, alpha2`` (betas eliminated)."""
    if not (tau2 > tau1 > 0):
        raise ValidationError("full oracle needs tau2 > tau1 > 0")
    p = ReducedDual.from_params(gram, targets, eps, C, tau1, tau2)
    G, y = p.gram, p.targets
    l = p.size
    upper = tau1 * C
    k = (tau2 - tau1) / tau1
    # objective as a function of x = [alpha1; alpha2]
    H = k * k * np.block([[G, -G], [-G, G]])
    q = np.concatenate([k * y - eps * k, -k * y - eps * k])
    c = np.concatenate([np.ones(l), -np.ones(l)])
    L = max(float(np.linalg.eigvalsh(H)[-1]), 1e-12)

    x = project_box_hyperplane(np.full(2 * l, upper / 2), c, upper)
    z = x.copy()
    theta = 1.0
    it = 0
    res = np.inf
    while it < max_iter:
        grad = H @ z + q
        x_new = project_box_hyperplane(z - grad / L, c, upper)
        res = float(np.abs(x_new - z).max()) * L
        # gradient restart keeps the momentum from overshooting
        if (z - x_new) @ (x_new - x) > 0:
            theta = 1.0
        theta_new = 0.5 * (1 + np.sqrt(1 + 4 * theta * theta))
        z = x_new + ((theta - 1) / theta_new) * (x_new - x)
        x, theta = x_new, theta_new
        it += 1
        if res <= tol * (1.0 + np.abs(q).max()):
            break
        if it % 200 == 0:
            polished = _polish(H, q, c, upper, x, 1e-9)
            if polished is not None:
                x = polished
                break
    else:
        polished = _polish(H, q, c, upper, x, 1e-9)
        if polished is None:
            raise ConvergenceError("full oracle did not converge", res)
        x = polished

    polished = _polish(H, q, c, upper, x, 1e-9)
    if polished is not None and (0.5 * polished @ H @ polished + q @ polished
                                 <= 0.5 * x @ H @ x + q @ x + 1e-14 * (1 + abs(q @ x))):
        x = polished
    a1, a2 = x[:l], x[l:]
    obj, b1, b2 = _verbatim(G, y, eps, C, tau1, tau2, a1, a2)
    u1, u2 = a1 + b1, a2 + b2
    extras = {
        "alpha1": a1, "alpha2": a2, "beta1": b1, "beta2": b2,
        "equality": float(np.sum(a1 - a2 + b1 - b2)),
    }
    sol = finalize(p, u1, u2, it, "full-oracle", extras=extras)
    sol.objective = obj
    return sol
