"""Cross-validated grid search, repeated benchmarks and curve emission.

Every job (one grid cell, or one repetition of a benchmark) is independent and
owns its data, so jobs can run on a bounded process pool.  Results are sorted
by their parameters before anything is written, which keeps the CSV outputs
byte-identical for a given configuration.  Timings only go to the text table
and the JSON ledger.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, fit_scaling, load_csv, looks_like_header, make_folds
from .errors import RPSVRError, ValidationError
from .kernels import KernelSpec
from .losses import LossParams, influence, rp_density, rp_loss
from .metrics import MetricReport, evaluate
from .svr import HyperParams, fit, predict
from .synth import SynthSpec, generate

log = logging.getLogger(__name__)


def _grid(values):
    return [round(float(v), 10) for v in values]


POW2_GRID = _grid(2.0**i for i in range(-10, 13))
EPS_GRID = _grid([0.05, 0.1, *(0.1 * i for i in range(2, 11)), *(0.5 * i for i in range(3, 11))])
TAU2_GRID = _grid(0.5 + 0.1 * i for i in range(21))
TAU1_GRID = _grid(0.1 * i for i in range(1, 11))

METRICS = ("sse_sst", "ssr_sst", "rmse", "mae", "sparsity_percent")


@dataclass
class ExperimentConfig:
    """Settings shared by grid search and benchmarks.

    ``dataset`` is either ``{"synth": {"kind": ..., "n_train": ..., ...}}`` or
    ``{"csv": {"train": path, "test": optional path, "header": optional bool}}``.
    """

    dataset: dict
    kernel: str = "rbf"
    C: list = field(default_factory=lambda: list(POW2_GRID))
    q: list = field(default_factory=lambda: list(POW2_GRID))
    eps: list = field(default_factory=lambda: list(EPS_GRID))
    tau1: list = field(default_factory=lambda: list(TAU1_GRID))
    tau2: list = field(default_factory=lambda: list(TAU2_GRID))
    #: explicit (tau2, tau1) pairs for benchmarks; defaults to the filtered grid product
    pairs: list | None = None
    folds: int = 5
    repeats: int = 10
    seed: int = 0
    workers: int = 1
    tol: float = 1e-6
    max_iter: int = 10_000_000
    #: "auto" scales CSV sources to [0, 1] and leaves synthetic data alone
    scale: str = "auto"
    out: str = "out"

    def __post_init__(self):
        if not isinstance(self.dataset, dict) or not ({"synth", "csv"} & set(self.dataset)):
            raise ValidationError("dataset must contain a 'synth' or 'csv' entry")
        for name in ("C", "q", "eps", "tau1", "tau2"):
            values = getattr(self, name)
            if self.kernel == "linear" and name == "q":
                continue
            if not values:
                raise ValidationError(f"grid {name!r} is empty")
            setattr(self, name, _grid(values))
        if self.kernel not in ("rbf", "linear"):
            raise ValidationError(f"unknown kernel {self.kernel!r}")
        if self.scale not in ("auto", "none", "minmax"):
            raise ValidationError(f"scale must be 'auto', 'none' or 'minmax', got {self.scale!r}")
        if self.folds < 2 or self.repeats < 1 or self.workers < 1:
            raise ValidationError("need folds >= 2, repeats >= 1 and workers >= 1")
        if self.pairs is not None:
            self.pairs = [tuple(_grid(p)) for p in self.pairs]

    @classmethod
    def from_dict(cls, d) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def tau_pairs(self) -> list[tuple[float, float]]:
        """(tau2, tau1) pairs, restricted to ``tau2 > tau1``."""
        if self.pairs is not None:
            pairs = self.pairs
        else:
            pairs = [(t2, t1) for t2 in self.tau2 for t1 in self.tau1]
        return sorted({(t2, t1) for t2, t1 in pairs if t2 > t1})

    def resolved_scale(self) -> str:
        if self.scale != "auto":
            return self.scale
        return "minmax" if "csv" in self.dataset else "none"

    def kernel_spec(self, q) -> KernelSpec:
        return KernelSpec("linear") if self.kernel == "linear" else KernelSpec("rbf", q)

    def q_values(self):
        return [None] if self.kernel == "linear" else self.q


def _load_source(cfg: ExperimentConfig, seed: int):
    """(train, test) for one repetition; test is None for CSV sources without a test file."""
    if "synth" in cfg.dataset:
        s = dict(cfg.dataset["synth"])
        s.setdefault("seed", seed)
        s["seed"] = seed
        return generate(SynthSpec(**s))
    src = cfg.dataset["csv"]
    def read(path):
        header = src.get("header")
        return load_csv(path, has_header=looks_like_header(path) if header is None else header)
    test = read(src["test"]) if src.get("test") else None
    return read(src["train"]), test


def _dataset_name(cfg: ExperimentConfig) -> str:
    if "synth" in cfg.dataset:
        return cfg.dataset["synth"]["kind"]
    return Path(cfg.dataset["csv"]["train"]).stem


def fit_and_score(train: Dataset, test: Dataset, hp: HyperParams, tol, max_iter, scale):
    """Fit on ``train``, evaluate on ``test``; returns (report with sparsity, seconds)."""
    scaling = fit_scaling(train) if scale == "minmax" else None
    t0 = time.perf_counter()
    m = fit(train, hp, tol=tol, max_iter=max_iter, scaling=scaling)
    seconds = time.perf_counter() - t0
    rep = evaluate(test.targets, predict(m, test.features))
    return rep.with_sparsity(m.diagnostics["sparsity_percent"]), seconds


# ---------------------------------------------------------------- grid search

def _key(hp: HyperParams):
    q = hp.kernel.q if hp.kernel.q is not None else 0.0
    return (hp.C, q, hp.eps, hp.tau2, hp.tau1)


@dataclass
class CellResult:
    stage: str
    params: HyperParams
    fold_reports: list = field(default_factory=list)
    seconds: float = 0.0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def mean_rmse(self) -> float:
        return float(np.mean([r.rmse for r in self.fold_reports])) if self.ok else math.inf

    @property
    def std_rmse(self) -> float:
        return _std([r.rmse for r in self.fold_reports]) if self.ok else math.nan

    @property
    def sparsity(self) -> float:
        return float(np.mean([r.sparsity_percent for r in self.fold_reports])) if self.ok else math.nan

    def sort_key(self):
        return (self.mean_rmse, *_key(self.params))

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "params": self.params.to_dict(),
            "fold_reports": [r.to_dict() for r in self.fold_reports],
            "mean_rmse": self.mean_rmse if self.ok else None,
            "seconds": self.seconds,
            "error": self.error,
        }


def _cv_job(args):
    stage, data, plan_folds, k, hp, tol, max_iter, scale = args
    cell = CellResult(stage, hp)
    try:
        for fold in range(k):
            tr = data.subset(np.flatnonzero(plan_folds != fold))
            te = data.subset(np.flatnonzero(plan_folds == fold))
            rep, secs = fit_and_score(tr, te, hp, tol, max_iter, scale)
            cell.fold_reports.append(rep)
            cell.seconds += secs
    except (RPSVRError, FloatingPointError, np.linalg.LinAlgError) as exc:
        cell.fold_reports = []
        cell.error = f"{type(exc).__name__}: {exc}"
    return cell


def _run_jobs(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (8 * workers))))


@dataclass
class GridResult:
    best: CellResult
    table: list
    failures: list
    #: one entry per evaluated cell: stage and model family
    ledger: list
    stage1_best: CellResult | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["stage", "C", "q", "eps", "tau1", "tau2", "mean_rmse", "std_rmse",
                    "sparsity_percent", "status"])
        for c in self.table:
            p = c.params
            w.writerow([c.stage, repr(p.C), "" if p.kernel.q is None else repr(p.kernel.q),
                        repr(p.eps), repr(p.tau1), repr(p.tau2),
                        repr(c.mean_rmse) if c.ok else "", repr(c.std_rmse) if c.ok else "",
                        repr(c.sparsity) if c.ok else "", "ok" if c.ok else c.error])
        return buf.getvalue()


def _search(cfg, data, plan, stage, cells):
    scale = cfg.resolved_scale()
    jobs = [(stage, data, plan.folds, plan.k, hp, cfg.tol, cfg.max_iter, scale) for hp in cells]
    results = _run_jobs(_cv_job, jobs, cfg.workers)
    results.sort(key=lambda c: _key(c.params))
    return results


def grid_search(cfg: ExperimentConfig, *, protocol: str = "two-stage", frozen=None,
                data: Dataset | None = None) -> GridResult:
    """Exhaustive k-fold search minimising mean CV RMSE.

    ``protocol``:
      * ``"two-stage"``: tune (C, q, eps) with eps-SVR, then freeze them and tune
        only (tau1, tau2) for the RP model;
      * ``"eps-svr"``: only the first stage;
      * ``"tau"``: only the second stage, at ``frozen = (C, q, eps)``;
      * ``"joint"``: every (C, q, eps, tau1, tau2) combination at once.

    Ties in mean RMSE go to smaller C, then q, eps, tau2, tau1.
    """
    if protocol not in ("two-stage", "eps-svr", "tau", "joint"):
        raise ValidationError(f"unknown protocol {protocol!r}")
    if data is None:
        data, _ = _load_source(cfg, cfg.seed)
    plan = make_folds(data.n_samples, cfg.folds, cfg.seed)
    ledger, table = [], []

    def run(stage, cells):
        res = _search(cfg, data, plan, stage, cells)
        for c in res:
            ledger.append({"stage": stage, "model": "eps-svr" if c.params.is_eps_svr else "rp",
                           "params": c.params.to_dict()})
        table.extend(res)
        good = [c for c in res if c.ok]
        return min(good, key=CellResult.sort_key) if good else None

    stage1 = None
    if protocol in ("two-stage", "eps-svr"):
        cells = [HyperParams.eps_svr(C, e, cfg.kernel_spec(q))
                 for C in cfg.C for q in cfg.q_values() for e in cfg.eps]
        stage1 = run("eps-svr", cells)
        if stage1 is None:
            raise ValidationError("every grid cell failed in the eps-SVR stage")
        frozen = (stage1.params.C, stage1.params.kernel.q, stage1.params.eps)
    if protocol in ("two-stage", "tau"):
        if frozen is None:
            raise ValidationError("the tau stage needs frozen (C, q, eps)")
        C, q, e = frozen
        cells = [HyperParams(C, e, t1, t2, cfg.kernel_spec(q)) for t2, t1 in cfg.tau_pairs()]
        best = run("tau", cells)
    elif protocol == "joint":
        cells = [HyperParams(C, e, t1, t2, cfg.kernel_spec(q))
                 for C in cfg.C for q in cfg.q_values() for e in cfg.eps
                 for t2, t1 in cfg.tau_pairs()]
        best = run("joint", cells)
    else:
        best = stage1
    if best is None:
        raise ValidationError("every grid cell failed")
    failures = [c for c in table if not c.ok]
    for c in failures:
        log.warning("grid cell %s failed: %s", c.params.to_dict(), c.error)
    return GridResult(best, table, failures, ledger, stage1)


def write_grid(result: GridResult, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / "grid.csv", "ledger": out / "grid_ledger.json"}
    paths["csv"].write_text(result.to_csv())
    paths["ledger"].write_text(json.dumps({
        "best": result.best.to_dict(),
        "stage1_best": result.stage1_best.to_dict() if result.stage1_best else None,
        "failures": [c.to_dict() for c in result.failures],
        "runs": result.ledger,
        "cells": [c.to_dict() for c in result.table],
    }, indent=1) + "\n")
    return paths


# ------------------------------------------------------------------ benchmark

def _std(values) -> float:
    """Sample standard deviation (ddof=1); 0 for a single value."""
    v = np.asarray(values, dtype=np.float64)
    return float(v.std(ddof=1)) if v.size > 1 else 0.0


def aggregate(reports) -> dict:
    """Mean and std of every metric; undefined ratios are dropped before averaging."""
    agg = {}
    for name in METRICS:
        vals = [getattr(r, name) for r in reports if getattr(r, name) is not None]
        agg[name] = {"mean": float(np.mean(vals)) if vals else None,
                     "std": _std(vals) if vals else None, "n": len(vals)}
    return agg


@dataclass
class RunRecord:
    label: str
    params: HyperParams
    reports: list
    seconds: list
    aggregate: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.aggregate:
            self.aggregate = aggregate(self.reports)

    def mean(self, metric: str):
        return self.aggregate[metric]["mean"]

    def std(self, metric: str):
        return self.aggregate[metric]["std"]

    def to_dict(self) -> dict:
        return {"label": self.label, "params": self.params.to_dict(),
                "reports": [r.to_dict() for r in self.reports],
                "seconds": self.seconds, "aggregate": self.aggregate}

    @classmethod
    def from_dict(cls, d) -> "RunRecord":
        reports = [MetricReport.from_dict(r) for r in d["reports"]]
        rec = cls(d["label"], HyperParams.from_dict(d["params"]), reports, list(d["seconds"]))
        stored = d.get("aggregate")
        if stored is not None and json.loads(json.dumps(rec.aggregate)) != stored:
            raise ValidationError(f"stored aggregate of {d['label']!r} does not match its runs")
        return rec


def _bench_job(args):
    cfg, rep_index, models = args
    if "synth" in cfg.dataset or cfg.dataset["csv"].get("test"):
        train, test = _load_source(cfg, cfg.seed + rep_index)
        splits = [(train, test)]
    else:
        data, _ = _load_source(cfg, cfg.seed)
        plan = make_folds(data.n_samples, cfg.folds, cfg.seed)
        tr, te = plan.train_index(rep_index), plan.test_index(rep_index)
        splits = [(data.subset(tr), data.subset(te))]
    out = []
    for label, hp in models:
        for train, test in splits:
            rep, secs = fit_and_score(train, test, hp, cfg.tol, cfg.max_iter, cfg.resolved_scale())
            out.append((label, hp, rep, secs))
    return rep_index, out


@dataclass
class BenchResult:
    dataset: str
    records: list

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["dataset", "model", "C", "q", "eps", "tau1", "tau2", "n_runs"]
        for m in METRICS:
            head += [f"{m}_mean", f"{m}_std"]
        w.writerow(head)
        for r in self.records:
            p = r.params
            row = [self.dataset, r.label, repr(p.C), "" if p.kernel.q is None else repr(p.kernel.q),
                   repr(p.eps), repr(p.tau1), repr(p.tau2), str(len(r.reports))]
            for m in METRICS:
                a = r.aggregate[m]
                row += ["" if a["mean"] is None else repr(a["mean"]),
                        "" if a["std"] is None else repr(a["std"])]
            w.writerow(row)
        return buf.getvalue()

    def to_text(self) -> str:
        def pm(r, m):
            a = r.aggregate[m]
            return "undefined" if a["mean"] is None else f"{a['mean']:.4f} ± {a['std']:.4f}"
        rows = [("model", "tau2, tau1", "SSE/SST", "SSR/SST", "RMSE", "MAE", "Sparsity%",
                 "(q, C, eps)", "CPU time")]
        for r in self.records:
            p = r.params
            q = "-" if p.kernel.q is None else f"{p.kernel.q:g}"
            taus = "-" if r.label == "eps-svr" else f"{p.tau2:g}, {p.tau1:g}"
            rows.append((r.label, taus, pm(r, "sse_sst"), pm(r, "ssr_sst"), pm(r, "rmse"),
                         pm(r, "mae"), f"{r.mean('sparsity_percent'):.1f}",
                         f"({q}, {p.C:g}, {p.eps:g})", f"{np.mean(r.seconds):.3f}"))
        widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
        lines = [f"dataset: {self.dataset}"]
        for row in rows:
            lines.append("  ".join(c.ljust(wd) for c, wd in zip(row, widths)).rstrip())
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps({"dataset": self.dataset,
                           "records": [r.to_dict() for r in self.records]}, indent=1) + "\n"


def load_bench_ledger(path) -> BenchResult:
    """Reload a benchmark ledger; aggregates are recomputed and checked against the stored ones."""
    d = json.loads(Path(path).read_text())
    return BenchResult(d["dataset"], [RunRecord.from_dict(r) for r in d["records"]])


def benchmark(cfg: ExperimentConfig, frozen=None) -> BenchResult:
    """Rows for eps-SVR and each (tau2, tau1) pair at frozen (C, q, eps).

    Synthetic sources use ``cfg.repeats`` fresh draws with seeds ``seed + r``;
    CSV sources without a test file use ``cfg.folds``-fold cross-validation.
    Every model sees the same data in a given repetition.
    """
    if frozen is None:
        frozen = (cfg.C[0], cfg.q_values()[0], cfg.eps[0])
    C, q, e = frozen
    kern = cfg.kernel_spec(q)
    models = [("eps-svr", HyperParams.eps_svr(C, e, kern))]
    models += [("rp", HyperParams(C, e, t1, t2, kern)) for t2, t1 in cfg.tau_pairs()]
    csv_cv = "csv" in cfg.dataset and not cfg.dataset["csv"].get("test")
    n_rep = cfg.folds if csv_cv else cfg.repeats
    results = _run_jobs(_bench_job, [(cfg, r, models) for r in range(n_rep)], cfg.workers)
    results.sort(key=lambda t: t[0])
    records = []
    for k, (label, hp) in enumerate(models):
        reps = [res[k][2] for _, res in results]
        secs = [res[k][3] for _, res in results]
        records.append(RunRecord(label, hp, reps, secs))
    return BenchResult(_dataset_name(cfg), records)


def write_bench(result: BenchResult, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / "bench.csv", "text": out / "bench.txt", "ledger": out / "bench.json"}
    paths["csv"].write_text(result.to_csv())
    paths["text"].write_text(result.to_text())
    paths["ledger"].write_text(result.to_json())
    return paths


# --------------------------------------------------------------------- curves

CURVE_KINDS = ("loss", "influence", "density", "tau1_sweep")


def _axis(start, stop, step):
    if not (np.isfinite(start) and np.isfinite(stop)) or stop < start:
        raise ValidationError("curve range must be finite with start <= stop")
    if not step > 0:
        raise ValidationError("step must be positive")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(n), 12)


def emit_curves(kind: str, params: dict, start: float, stop: float, step: float, out=None):
    """Tabulate a curve on ``start, start+step, ..., stop``; returns (header, rows).

    For ``loss``, ``influence`` and ``density``, ``params`` holds ``eps`` and a
    list ``pairs`` of ``[tau2, tau1]``; one column per pair.  Pairs with
    ``tau1 < 0`` need ``allow_nonconvex: true``.

    ``tau1_sweep`` retrains the RP model for each tau1 on the axis; ``params``
    holds ``dataset`` (a synthetic spec), ``C``, ``q``, ``eps``, ``tau2`` and
    optionally ``metric`` (default ``sse_sst``), ``repeats`` and ``seed``.
    """
    if kind not in CURVE_KINDS:
        raise ValidationError(f"unknown curve kind {kind!r}; expected one of {CURVE_KINDS}")
    axis = _axis(start, stop, step)
    if kind == "tau1_sweep":
        header, rows = _tau1_sweep(params, axis)
    else:
        eps = params.get("eps")
        if eps is None:
            raise ValidationError("curve needs eps")
        allow = bool(params.get("allow_nonconvex", False))
        pairs = params.get("pairs") or [[1.0, 0.0]]
        fn = {"loss": rp_loss, "influence": influence, "density": rp_density}[kind]
        header = ["u"] + [f"tau2={t2:g};tau1={t1:g}" for t2, t1 in pairs]
        cols = [fn(axis, LossParams(t1, t2, eps, allow_nonconvex=allow)) for t2, t1 in pairs]
        rows = [[axis[i], *(c[i] for c in cols)] for i in range(axis.size)]
    if out is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(buf.getvalue())
    return header, rows


def _tau1_sweep(params, axis):
    metric = params.get("metric", "sse_sst")
    if metric not in METRICS:
        raise ValidationError(f"unknown metric {metric!r}")
    try:
        C, q, eps, tau2 = (float(params[k]) for k in ("C", "q", "eps", "tau2"))
        synth = dict(params["dataset"])
    except KeyError as exc:
        raise ValidationError(f"tau1_sweep needs parameter {exc.args[0]!r}") from None
    repeats = int(params.get("repeats", 1))
    seed = int(params.get("seed", 0))
    kern = KernelSpec("rbf", q)
    draws = []
    for r in range(repeats):
        synth["seed"] = seed + r
        draws.append(generate(SynthSpec(**synth)))
    rows = []
    for t1 in axis:
        hp = HyperParams(C, eps, float(t1), tau2, kern)
        vals = []
        for train, test in draws:
            rep, _ = fit_and_score(train, test, hp, 1e-6, 10_000_000, "none")
            v = getattr(rep, metric)
            vals.append(math.nan if v is None else v)
        rows.append([float(t1), float(np.mean(vals))])
    return ["tau1", metric], rows
