"""Test-set evaluation criteria: SSE, SST, SSR, RMSE, MAE and their ratios."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ValidationError

CSV_FIELDS = ("sse", "sst", "ssr", "rmse", "mae", "sse_sst", "ssr_sst", "sparsity_percent")


@dataclass(frozen=True)
class MetricReport:
    sse: float
    sst: float
    ssr: float
    rmse: float
    mae: float
    #: ``None`` when ``sst == 0``
    sse_sst: float | None
    ssr_sst: float | None
    n: int
    sparsity_percent: float | None = None

    @property
    def ratios_undefined(self) -> bool:
        return self.sse_sst is None

    def with_sparsity(self, value: float) -> "MetricReport":
        d = asdict(self)
        d["sparsity_percent"] = float(value)
        return MetricReport(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ratios_undefined"] = self.ratios_undefined
        return d

    @classmethod
    def from_dict(cls, d) -> "MetricReport":
        return cls(**{k: d.get(k) for k in cls.__dataclass_fields__})

    def csv_row(self) -> list[str]:
        """Values in :data:`CSV_FIELDS` order; undefined entries are empty strings."""
        out = []
        for name in CSV_FIELDS:
            v = getattr(self, name)
            out.append("" if v is None else repr(float(v)))
        return out


def evaluate(y_true, y_pred) -> MetricReport:
    y = np.asarray(y_true, dtype=np.float64).reshape(-1)
    yp = np.asarray(y_pred, dtype=np.float64).reshape(-1)
    if y.shape != yp.shape:
        raise ValidationError(f"length mismatch: {y.shape[0]} targets vs {yp.shape[0]} predictions")
    k = y.shape[0]
    if k == 0:
        raise ValidationError("cannot evaluate an empty test set")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(yp))):
        raise ValidationError("targets and predictions must be finite")
    ybar = y.mean()
    err = y - yp
    sse = float(err @ err)
    sst = float(np.sum((y - ybar) ** 2))
    ssr = float(np.sum((yp - ybar) ** 2))
    defined = sst > 0.0
    return MetricReport(
        sse=sse,
        sst=sst,
        ssr=ssr,
        rmse=math.sqrt(sse / k),
        mae=float(np.abs(err).mean()),
        sse_sst=sse / sst if defined else None,
        ssr_sst=ssr / sst if defined else None,
        n=k,
    )
