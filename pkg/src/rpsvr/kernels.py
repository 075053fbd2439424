"""Linear and RBF kernels, ``k(x, z) = x.z`` and ``k(x, z) = exp(-||x - z||^2 / q)``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

KINDS = ("linear", "rbf")


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"
    q: float | None = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown kernel {self.kind!r}; expected one of {KINDS}")
        if self.kind == "rbf":
            if self.q is None or not np.isfinite(self.q) or self.q <= 0:
                raise ValidationError(f"rbf kernel needs q > 0, got {self.q}")
            object.__setattr__(self, "q", float(self.q))
        else:
            object.__setattr__(self, "q", None)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "q": self.q}

    @classmethod
    def from_dict(cls, d) -> "KernelSpec":
        return cls(d["kind"], d.get("q"))


def kernel_eval(spec: KernelSpec, x, z) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    z = np.asarray(z, dtype=np.float64).ravel()
    if x.shape != z.shape:
        raise ValidationError(f"dimension mismatch: {x.shape[0]} vs {z.shape[0]}")
    if spec.kind == "linear":
        return float(x @ z)
    d = x - z
    return float(np.exp(-(d @ d) / spec.q))


def _sq_dists(X, Z):
    # clamp: the expansion can go slightly negative through cancellation
    d = (X * X).sum(1)[:, None] + (Z * Z).sum(1)[None, :] - 2.0 * (X @ Z.T)
    return np.maximum(d, 0.0)


def cross_kernel(spec: KernelSpec, X, Z) -> np.ndarray:
    """Kernel matrix ``K[i, j] = k(X[i], Z[j])``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    if X.shape[1] != Z.shape[1]:
        raise ValidationError(f"dimension mismatch: {X.shape[1]} vs {Z.shape[1]}")
    if spec.kind == "linear":
        return X @ Z.T
    return np.exp(-_sq_dists(X, Z) / spec.q)


def gram(spec: KernelSpec, data) -> np.ndarray:
    """Symmetric Gram matrix of the rows of ``data`` (a Dataset or an array).

    The upper triangle is computed and mirrored so ``G == G.T`` exactly; RBF
    diagonals are exactly 1.
    """
    X = data.features if hasattr(data, "features") else np.atleast_2d(np.asarray(data, float))
    if spec.kind == "linear":
        G = X @ X.T
    else:
        G = np.exp(-_sq_dists(X, X) / spec.q)
        np.fill_diagonal(G, 1.0)
    iu = np.triu_indices(G.shape[0], 1)
    G[(iu[1], iu[0])] = G[iu]
    return G
