"""``rpsvr`` command line: gen, fit, predict, eval, gridsearch, bench, curves.

Exit codes: 0 on success, 2 on invalid input or missing files, 3 when the
solver fails to converge.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .data import fit_scaling, load_csv, looks_like_header
from .errors import ConvergenceError, ValidationError
from .harness import (
    CURVE_KINDS,
    ExperimentConfig,
    benchmark,
    emit_curves,
    grid_search,
    write_bench,
    write_grid,
)
from .kernels import KernelSpec
from .metrics import evaluate
from .svr import HyperParams, fit, load_model, predict, save_model
from .synth import KINDS, SynthSpec, write_generated

EXIT_OK, EXIT_INVALID, EXIT_CONVERGENCE = 0, 2, 3


def _read(path, header):
    if not Path(path).is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return load_csv(path, has_header=looks_like_header(path) if header is None else header)


def _read_column(path, header) -> np.ndarray:
    """Last column of a CSV: the targets of a dataset file or a one-column prediction file."""
    if not Path(path).is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if header is None:
        header = looks_like_header(path)
    if header:
        rows = rows[1:]
    try:
        return np.array([float(r[-1]) for r in rows])
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args) -> ExperimentConfig:
    if not args.config:
        raise ValidationError("--config is required")
    cfg = ExperimentConfig.from_json(args.config)
    overrides = {"workers": args.workers, "seed": args.seed, "tol": args.tol,
                 "max_iter": args.max_iter, "out": args.out}
    for k, v in overrides.items():
        if v is not None:
            setattr(cfg, k, v)
    return cfg


def cmd_gen(args):
    spec = SynthSpec(args.kind, args.n_train, args.n_test, args.seed or 0, args.normal_param)
    manifest = write_generated(spec, _out_dir(args))
    print(json.dumps(manifest))


def cmd_fit(args):
    data = _read(args.train, args.header)
    kern = KernelSpec(args.kernel, args.q if args.kernel == "rbf" else None)
    hp = HyperParams(args.C, args.eps, args.tau1, args.tau2, kern)
    scaling = fit_scaling(data) if args.scale == "minmax" else None
    m = fit(data, hp, tol=args.tol or 1e-6, max_iter=args.max_iter or 10_000_000,
            scaling=scaling, solver=args.solver)
    path = Path(args.model) if args.model else _out_dir(args) / "model.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_model(m, path)
    print(json.dumps({"model": str(path), "bias": m.bias, "n_support": m.n_support,
                      **m.diagnostics}))


def cmd_predict(args):
    m = load_model(args.model)
    data = _read(args.data, args.header)
    pred = predict(m, data.features)
    path = Path(args.pred) if args.pred else _out_dir(args) / "predictions.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["prediction"])
        w.writerows([repr(float(v))] for v in pred)
    print(json.dumps({"predictions": str(path), "n": int(pred.size)}))


def cmd_eval(args):
    rep = evaluate(_read_column(args.truth, args.header), _read_column(args.pred, None))
    text = json.dumps(rep.to_dict())
    if args.out:
        (_out_dir(args) / "metrics.json").write_text(text + "\n")
    print(text)


def cmd_gridsearch(args):
    cfg = _config(args)
    res = grid_search(cfg, protocol=args.protocol)
    paths = write_grid(res, _out_dir(args) if args.out else cfg.out)
    print(json.dumps({"best": res.best.params.to_dict(), "mean_rmse": res.best.mean_rmse,
                      "failures": len(res.failures), **{k: str(v) for k, v in paths.items()}}))


def cmd_bench(args):
    cfg = _config(args)
    frozen = None
    if args.C is not None or args.eps is not None:
        if args.C is None or args.eps is None or (cfg.kernel == "rbf" and args.q is None):
            raise ValidationError("--C, --eps (and --q for rbf) must be given together")
        frozen = (args.C, args.q, args.eps)
    elif args.tune:
        frozen_cell = grid_search(cfg, protocol="eps-svr").best.params
        frozen = (frozen_cell.C, frozen_cell.kernel.q, frozen_cell.eps)
    res = benchmark(cfg, frozen)
    paths = write_bench(res, _out_dir(args) if args.out else cfg.out)
    sys.stdout.write(res.to_text())
    print(json.dumps({k: str(v) for k, v in paths.items()}))


def cmd_curves(args):
    if args.params:
        params = json.loads(Path(args.params).read_text())
    else:
        params = {"eps": args.eps, "allow_nonconvex": args.allow_nonconvex}
        if args.pair:
            params["pairs"] = [[float(x) for x in p.split(",")] for p in args.pair]
    out = _out_dir(args) / f"{args.kind}.csv"
    header, rows = emit_curves(args.kind, params, args.start, args.stop, args.step, out)
    print(json.dumps({"curve": str(out), "columns": header, "rows": len(rows)}))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--config", default=None, help="experiment config (JSON)")
    common.add_argument("--workers", type=int, default=None)
    common.add_argument("--tol", type=float, default=None)
    common.add_argument("--max-iter", type=int, default=None)
    common.add_argument("--header", dest="header", action="store_true", default=None,
                        help="input CSVs have a header row (default: detect)")
    common.add_argument("--no-header", dest="header", action="store_false")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="rpsvr", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="write a synthetic dataset")
    g.add_argument("--kind", required=True, choices=KINDS)
    g.add_argument("--n-train", type=int, default=None)
    g.add_argument("--n-test", type=int, default=None)
    g.add_argument("--normal-param", choices=("std", "variance"), default=None)
    g.set_defaults(func=cmd_gen, out_default="data")

    f = sub.add_parser("fit", parents=[common], help="train a model")
    f.add_argument("--train", required=True)
    f.add_argument("--kernel", choices=("linear", "rbf"), default="rbf")
    f.add_argument("--q", type=float, default=1.0)
    f.add_argument("--C", type=float, required=True)
    f.add_argument("--eps", type=float, required=True)
    f.add_argument("--tau1", type=float, default=0.0)
    f.add_argument("--tau2", type=float, default=1.0)
    f.add_argument("--scale", choices=("none", "minmax"), default="none")
    f.add_argument("--solver", choices=("smo", "reference"), default="smo")
    f.add_argument("--model", default=None, help="model path (default: OUT/model.json)")
    f.set_defaults(func=cmd_fit, out_default=".")

    pr = sub.add_parser("predict", parents=[common], help="predict with a saved model")
    pr.add_argument("--model", required=True)
    pr.add_argument("--data", required=True)
    pr.add_argument("--pred", default=None, help="output path (default: OUT/predictions.csv)")
    pr.set_defaults(func=cmd_predict, out_default=".")

    e = sub.add_parser("eval", parents=[common], help="score predictions against targets")
    e.add_argument("--truth", required=True)
    e.add_argument("--pred", required=True)
    e.set_defaults(func=cmd_eval, out_default=None)

    gs = sub.add_parser("gridsearch", parents=[common], help="cross-validated grid search")
    gs.add_argument("--protocol", choices=("two-stage", "eps-svr", "tau", "joint"),
                    default="two-stage")
    gs.set_defaults(func=cmd_gridsearch, out_default=None)

    b = sub.add_parser("bench", parents=[common], help="repeated benchmark table")
    b.add_argument("--C", type=float, default=None)
    b.add_argument("--q", type=float, default=None)
    b.add_argument("--eps", type=float, default=None)
    b.add_argument("--tune", action="store_true",
                   help="pick (C, q, eps) by an eps-SVR grid search first")
    b.set_defaults(func=cmd_bench, out_default=None)

    c = sub.add_parser("curves", parents=[common], help="tabulate loss/influence/density curves")
    c.add_argument("--kind", required=True, choices=CURVE_KINDS)
    c.add_argument("--eps", type=float, default=None)
    c.add_argument("--pair", action="append", help="tau2,tau1 (repeatable)")
    c.add_argument("--params", default=None, help="JSON file with curve parameters")
    c.add_argument("--start", type=float, required=True)
    c.add_argument("--stop", type=float, required=True)
    c.add_argument("--step", type=float, required=True)
    c.add_argument("--allow-nonconvex", action="store_true")
    c.set_defaults(func=cmd_curves, out_default="curves")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.out is None and args.out_default is not None:
        args.out = args.out_default
    try:
        args.func(args)
    except ConvergenceError as exc:
        print(f"rpsvr: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ValidationError, OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"rpsvr: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
