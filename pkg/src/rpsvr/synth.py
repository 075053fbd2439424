"""Seeded generators for the artificial benchmark sets.

``type1`` to ``type8`` draw ``x ~ U[-4*pi, 4*pi)`` and add noise to the
training targets only.  ``linear_outlier`` is the straight line ``2x + 3``
with Gaussian noise and five gross outliers in the training half.

All randomness comes from ``numpy.random.default_rng(seed)`` (PCG64), so a
(kind, counts, seed, convention) tuple fully determines the output.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .data import Dataset, write_csv
from .errors import ValidationError

LOW, HIGH = -4.0 * math.pi, 4.0 * math.pi
KINDS = tuple(f"type{i}" for i in range(1, 9)) + ("linear_outlier",)

# kind -> (target, noise family, noise parameter)
_NOISE = {
    "type1": ("sinc", "uniform", 0.2),
    "type2": ("sinc", "uniform", 0.3),
    "type3": ("sinc", "uniform", 0.4),
    "type4": ("sinc", "normal", 0.1),
    "type5": ("sinc", "normal", 0.3),
    "type6": ("sinc", "normal", 0.4),
    "type7": ("wave", "uniform", 0.4),
    "type8": ("wave", "uniform", 0.6),
    "linear_outlier": ("line", "normal", 10.0),
}

N_OUTLIERS = 5
OUTLIER_SHIFT = (-50.0, -25.0)


def sinc(x):
    """``sin(x)/x`` with the removable singularity filled in (``sinc(0) = 1``)."""
    x = np.asarray(x, dtype=np.float64)
    small = np.abs(x) < 1e-12
    safe = np.where(small, 1.0, x)
    out = np.where(small, 1.0 - x * x / 6.0, np.sin(safe) / safe)
    return float(out) if out.ndim == 0 else out


def wave(x):
    x = np.asarray(x, dtype=np.float64)
    s = (x - 1.0) / 4.0
    out = np.abs(s) + np.abs(np.sin(np.pi * (1.0 + s))) + 1.0
    return float(out) if out.ndim == 0 else out


def line(x):
    x = np.asarray(x, dtype=np.float64)
    out = 2.0 * x + 3.0
    return float(out) if out.ndim == 0 else out


_TARGETS = {"sinc": sinc, "wave": wave, "line": line}


def target_function(kind: str):
    """Noise-free regression function for ``kind``."""
    return _TARGETS[_NOISE[_check_kind(kind)][0]]


def _check_kind(kind):
    if kind not in _NOISE:
        raise ValidationError(f"unknown dataset kind {kind!r}; expected one of {KINDS}")
    return kind


@dataclass(frozen=True)
class SynthSpec:
    kind: str
    n_train: int | None = None
    n_test: int | None = None
    seed: int = 0
    #: how the second parameter of a normal noise spec is read: "std" or "variance".
    #: ``None`` picks the per-kind default (std for type4-6, variance for linear_outlier).
    normal_param: str | None = None

    def __post_init__(self):
        _check_kind(self.kind)
        default = 300 if self.kind == "linear_outlier" else None
        n_train = self.n_train if self.n_train is not None else (default or 100)
        n_test = self.n_test if self.n_test is not None else (default or 500)
        for name, v in (("n_train", n_train), ("n_test", n_test)):
            if int(v) != v or v < 1:
                raise ValidationError(f"{name} must be a positive integer, got {v}")
        if self.kind == "linear_outlier" and n_train < N_OUTLIERS:
            raise ValidationError(f"linear_outlier needs at least {N_OUTLIERS} training points")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        conv = self.normal_param
        if conv is None:
            conv = "variance" if self.kind == "linear_outlier" else "std"
        if conv not in ("std", "variance"):
            raise ValidationError(f"normal_param must be 'std' or 'variance', got {conv!r}")
        object.__setattr__(self, "n_train", int(n_train))
        object.__setattr__(self, "n_test", int(n_test))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "normal_param", conv)

    @property
    def noise(self) -> tuple[str, float]:
        """(family, scale) where scale is the half-width (uniform) or std (normal)."""
        _, family, a = _NOISE[self.kind]
        if family == "normal" and self.normal_param == "variance":
            return family, math.sqrt(a)
        return family, a

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Generated:
    train: Dataset
    test: Dataset
    #: noise added to each training target (outlier shifts excluded)
    noise: np.ndarray
    #: training rows that received an outlier shift, and the shifts
    outliers: np.ndarray
    shifts: np.ndarray


def generate_detailed(spec: SynthSpec) -> Generated:
    rng = np.random.default_rng(spec.seed)
    f = target_function(spec.kind)
    n = spec.n_train + spec.n_test
    x = rng.uniform(LOW, HIGH, size=n)
    family, scale = spec.noise
    if family == "uniform":
        noise = rng.uniform(-scale, scale, size=spec.n_train)
    else:
        noise = rng.normal(0.0, scale, size=spec.n_train)
    y_train = f(x[: spec.n_train]) + noise
    outliers = np.array([], dtype=np.int64)
    shifts = np.array([], dtype=np.float64)
    if spec.kind == "linear_outlier":
        outliers = np.sort(rng.permutation(spec.n_train)[:N_OUTLIERS])
        shifts = rng.uniform(*OUTLIER_SHIFT, size=N_OUTLIERS)
        y_train[outliers] += shifts
    train = Dataset(x[: spec.n_train].reshape(-1, 1), y_train)
    test = Dataset(x[spec.n_train:].reshape(-1, 1), f(x[spec.n_train:]))
    return Generated(train, test, noise, outliers, shifts)


def generate(spec: SynthSpec) -> tuple[Dataset, Dataset]:
    g = generate_detailed(spec)
    return g.train, g.test


def write_dataset(d: Dataset, path, header: bool = True) -> None:
    write_csv(d, path, header=header)


def write_generated(spec: SynthSpec, out_dir) -> dict:
    """Write ``<kind>_s<seed>_train.csv``, ``..._test.csv`` and a manifest; return the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    g = generate_detailed(spec)
    stem = f"{spec.kind}_s{spec.seed}"
    train_path = out / f"{stem}_train.csv"
    test_path = out / f"{stem}_test.csv"
    write_dataset(g.train, train_path)
    write_dataset(g.test, test_path)
    manifest = {
        "spec": spec.to_dict(),
        "noise": {"family": spec.noise[0], "scale": spec.noise[1]},
        "generator": "numpy.random.default_rng (PCG64)",
        "train": train_path.name,
        "test": test_path.name,
        "outlier_rows": g.outliers.tolist(),
    }
    (out / f"{stem}_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest
