"""Datasets, min-max feature scaling, CSV ingestion and seeded fold plans.

All stochastic helpers take an explicit seed and draw from numpy's PCG64
generator (``np.random.default_rng``), whose output stream is specified and
identical across platforms.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IngestionError, ValidationError


def _frozen(a, ndim):
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise ValidationError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix ``features`` (l x n) with response vector ``targets`` (l,)."""

    features: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        X = _frozen(X, 2)
        y = _frozen(np.asarray(self.targets, dtype=np.float64).reshape(-1), 1)
        if X.shape[0] != y.shape[0]:
            raise ValidationError(
                f"features have {X.shape[0]} rows but targets have {y.shape[0]} entries"
            )
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValidationError("dataset contains NaN or Inf")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "targets", y)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def __len__(self):
        return self.n_samples

    def subset(self, index) -> "Dataset":
        index = np.asarray(index)
        return Dataset(self.features[index], self.targets[index])


@dataclass(frozen=True, eq=False)
class ScalingState:
    """Per-feature minimum and maximum learnt from a fitting set."""

    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self):
        lo = _frozen(self.minimum, 1)
        hi = _frozen(self.maximum, 1)
        if lo.shape != hi.shape:
            raise ValidationError("minimum and maximum must have the same length")
        if np.any(hi < lo):
            raise ValidationError("maximum below minimum for some feature")
        object.__setattr__(self, "minimum", lo)
        object.__setattr__(self, "maximum", hi)

    @property
    def constant(self) -> np.ndarray:
        """Boolean mask of features with ``max == min``."""
        return self.maximum == self.minimum

    def transform(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.minimum.shape[0]:
            raise ValidationError(
                f"scaling expects {self.minimum.shape[0]} features, got {X.shape[1]}"
            )
        span = np.where(self.constant, 1.0, self.maximum - self.minimum)
        out = (X - self.minimum) / span
        out[:, self.constant] = 0.0
        return out

    def to_dict(self) -> dict:
        return {"minimum": self.minimum.tolist(), "maximum": self.maximum.tolist()}

    @classmethod
    def from_dict(cls, d) -> "ScalingState":
        return cls(np.array(d["minimum"], dtype=float), np.array(d["maximum"], dtype=float))


@dataclass(frozen=True, eq=False)
class SplitPlan:
    """Assignment of each of ``l`` samples to one of ``k`` folds."""

    folds: np.ndarray
    k: int
    seed: int

    def __post_init__(self):
        f = np.array(self.folds, dtype=np.int64, copy=True)
        f.setflags(write=False)
        object.__setattr__(self, "folds", f)

    def test_index(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.folds == fold)

    def train_index(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.folds != fold)

    def splits(self):
        """Yield ``(train_index, test_index)`` for every fold in order."""
        for fold in range(self.k):
            yield self.train_index(fold), self.test_index(fold)

    def to_json(self) -> str:
        return json.dumps({"k": self.k, "seed": self.seed, "folds": self.folds.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "SplitPlan":
        d = json.loads(text)
        return cls(np.array(d["folds"]), int(d["k"]), int(d["seed"]))


def fit_scaling(data: Dataset) -> ScalingState:
    if data.n_samples < 1:
        raise ValidationError("cannot fit scaling on an empty dataset")
    return ScalingState(data.features.min(axis=0), data.features.max(axis=0))


def apply_scaling(data: Dataset, s: ScalingState) -> Dataset:
    """Map each feature to ``(x - min) / (max - min)``; constant features go to 0.

    Targets are returned untouched.
    """
    return Dataset(s.transform(data.features), data.targets)


def make_folds(l: int, k: int, seed: int) -> SplitPlan:
    """Shuffle ``range(l)`` with ``seed`` and deal it round-robin into ``k`` folds."""
    if k < 2:
        raise ValidationError(f"need at least 2 folds, got {k}")
    if k > l:
        raise ValidationError(f"cannot make {k} folds from {l} samples")
    perm = np.random.default_rng(seed).permutation(l)
    folds = np.empty(l, dtype=np.int64)
    folds[perm] = np.arange(l) % k
    return SplitPlan(folds, k, int(seed))


def _parse_rows(rows, first_row_number):
    values = []
    width = None
    for offset, row in enumerate(rows):
        lineno = first_row_number + offset
        if not row or all(not cell.strip() for cell in row):
            continue
        if width is None:
            width = len(row)
            if width < 2:
                raise IngestionError("need at least one feature and one target column", row=lineno)
        elif len(row) != width:
            raise IngestionError(
                f"ragged row: expected {width} columns, found {len(row)}", row=lineno
            )
        parsed = []
        for col, cell in enumerate(row, start=1):
            try:
                parsed.append(float(cell))
            except ValueError:
                raise IngestionError(f"cannot parse {cell!r} as a number", row=lineno, column=col)
        values.append(parsed)
    return values, width


def looks_like_header(path) -> bool:
    """True when the first non-empty line of ``path`` is not fully numeric."""
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            try:
                [float(c) for c in row]
            except ValueError:
                return True
            return False
    return False


def load_csv(path, has_header: bool = False) -> Dataset:
    """Read a comma separated file whose last column is the target."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or all(not r for r in rows):
        raise IngestionError(f"{path} is empty")
    start = 1
    header = None
    if has_header:
        header, rows = rows[0], rows[1:]
        start = 2
    values, width = _parse_rows(rows, start)
    if not values:
        if header is None:
            raise IngestionError(f"{path} has no data rows")
        if len(header) < 2:
            raise IngestionError("need at least one feature and one target column", row=1)
        return Dataset(np.empty((0, len(header) - 1)), np.empty(0))
    if header is not None and len(header) != width:
        raise IngestionError(
            f"header has {len(header)} columns but data has {width}", row=1
        )
    arr = np.array(values, dtype=np.float64)
    return Dataset(arr[:, :-1], arr[:, -1])


def write_csv(data: Dataset, path, header: bool = True) -> None:
    """Write ``data`` so that ``load_csv(path, has_header=header)`` round-trips exactly.

    Floats use ``repr`` (shortest string that parses back to the same double).
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow([f"x{j + 1}" for j in range(data.n_features)] + ["y"])
        for x, y in zip(data.features, data.targets):
            w.writerow([repr(float(v)) for v in x] + [repr(float(y))])
