"""Command-line entry point: ``rshdmr {gen,fit,predict,impute,eval}``.

Every command reads an INI config (see ``rshdmr.config``) and writes plain
CSV/JSON artifacts into the output directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import datasets as ds
from . import experiments as ex
from .config import ConfigError, RunConfig, load_config, require_file, to_text
from .errors import InputError, NumericalError
from .gpr import KernelParams
from .hdmr import (
    TrainingSchedule,
    hdmr_predict,
    hdmr_predict_std,
    hdmr_train,
    load_model,
    rmse,
    save_model,
)
from .imputation import ImputationPolicy, impute_dataset
from .projection import parse_matrices

logger = logging.getLogger("rshdmr")

EXPERIMENTS = (
    "water-1d", "water-2d", "water-2dstar", "additive-fit", "additive-impute",
    "coupled-impute", "power-impute", "quartic-candidates", "uneven", "noisy", "d15",
)


def _write_json(path: Path, payload):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _kernel(cfg):
    return KernelParams(cfg.length_scale, cfg.noise_variance)


def _schedule(cfg):
    return TrainingSchedule(cfg.cycles, cfg.scale_start, cfg.scale_rate)


def _policy(cfg):
    return ImputationPolicy(cfg.delta, cfg.subintervals, cfg.brackets)


def _load(cfg, key="path"):
    return ds.load_csv(require_file(cfg, key))


def _scaled_for_model(raw: ds.Dataset, model):
    if model.scaler is None:
        return raw
    return ds.apply_scaler(raw, model.scaler)


def cmd_gen(cfg: RunConfig) -> dict:
    if cfg.generator is None:
        raise ConfigError("datasets.generator", "required for gen")
    if cfg.generator == "additive":
        data = ds.gen_additive(cfg.n, cfg.d, cfg.seed)
    elif cfg.generator == "uneven":
        data = ds.gen_uneven(cfg.n_normal, cfg.n_uniform, cfg.seed, d=cfg.d)
    else:
        data = ds.GENERATORS[cfg.generator](cfg.n, cfg.seed)
    if cfg.noise > 0:
        data = ds.add_noise(data, cfg.noise, cfg.seed + 1)
    out = {"data": cfg.out / "data.csv"}
    if cfg.missing_per_column > 0:
        data, truth = ds.inject_missing(data, cfg.missing_per_column, cfg.seed, cfg.missing_columns)
        out["truth"] = cfg.out / "truth.csv"
        truth.save(out["truth"], data.column_names)
    ds.save_csv(data, out["data"])
    return out


def _prepare_training(cfg):
    raw = _load(cfg)
    complete = raw.complete_rows()
    if len(complete) < raw.M:
        logger.info("dropping %d incomplete rows before training", raw.M - len(complete))
    raw = raw.subset(complete)
    if cfg.scale == "minmax":
        data, _ = ds.minmax_scale(raw)
    else:
        data = raw
    if cfg.train_size is not None:
        if cfg.train_size > data.M:
            raise ConfigError("datasets.train_size", f"exceeds the {data.M} complete rows available")
        rows = np.random.default_rng(cfg.seed).permutation(data.M)[:cfg.train_size]
        train = data.subset(np.sort(rows))
    else:
        train = data
    return data, train


def cmd_fit(cfg: RunConfig) -> dict:
    full, train = _prepare_training(cfg)
    try:
        matrices = parse_matrices(cfg.matrices, full.D)
    except InputError as exc:
        raise ConfigError("projection.matrices", str(exc)) from exc
    model, report = hdmr_train(train, matrices, _kernel(cfg), _schedule(cfg), eval_data=full)
    paths = {"model": cfg.out / "model.npz", "report": cfg.out / "fit_report.json",
             "history": cfg.out / "history.csv"}
    save_model(model, paths["model"])
    _write_json(paths["report"], report.to_dict())
    with open(paths["history"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cycle", "rmse", "rmse_raw"])
        raw_hist = report.history_raw if report.history_raw is not None else [None] * len(report.history)
        for c, (v, vr) in enumerate(zip(report.history, raw_hist)):
            w.writerow([c, repr(float(v)), "" if vr is None else repr(float(vr))])
    logger.info("train rmse %.6g, full-set rmse %.6g", report.rmse_train, report.rmse_eval)
    return paths


def _unscale_target(model, values):
    return values if model.scaler is None else ds.unscale(values, model.scaler)


def cmd_predict(cfg: RunConfig, model_path: Path) -> dict:
    model = load_model(model_path)
    raw = _load(cfg)
    data = _scaled_for_model(raw, model)
    if data.has_missing():
        raise InputError("prediction input contains missing values; run impute first")
    pred = _unscale_target(model, hdmr_predict(model, data.X))
    std = hdmr_predict_std(model, data.X)
    if model.scaler is not None:
        std = std * model.scaler.y_range
    out = cfg.out / "predictions.csv"
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "true", "predicted", "std"])
        for i, (t, p, s) in enumerate(zip(raw.y, pred, std)):
            w.writerow([i, repr(float(t)), repr(float(p)), repr(float(s))])
    return {"predictions": out}


def cmd_impute(cfg: RunConfig, model_path: Path) -> dict:
    model = load_model(model_path)
    raw = _load(cfg)
    data = _scaled_for_model(raw, model)
    result = impute_dataset(model, data, _policy(cfg))
    completed = raw.copy()
    report_path = cfg.out / "imputation_report.csv"
    with open(report_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "column", "chosen", "residual_target", "candidates"])
        for cs in result.candidate_sets:
            v = cs.variable_index
            cands = cs.candidates
            if model.scaler is not None:
                cands = ds.unscale(cands, model.scaler, v)
            completed.X[cs.row_index, v] = cands[0]
            w.writerow([cs.row_index, raw.feature_names[v], repr(float(cands[0])),
                        repr(cs.target_value), " ".join(repr(float(c)) for c in cands)])
    out = cfg.out / "completed.csv"
    ds.save_csv(completed, out)
    return {"completed": out, "report": report_path}


def read_imputation_report(path, column_names):
    """Parse an imputation report into ``{(row, column_index): chosen}``."""
    index = {name: i for i, name in enumerate(column_names)}
    chosen = {}
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.DictReader(fh), start=2):
            try:
                chosen[(int(rec["row"]), index[rec["column"]])] = float(rec["chosen"])
            except (KeyError, TypeError, ValueError) as exc:
                raise InputError(f"{path}:{lineno}: malformed imputation record ({exc})") from exc
    return chosen


def cmd_eval(cfg: RunConfig, model_path: Path | None, experiment: str | None) -> dict:
    if experiment is not None:
        metrics = run_experiment(experiment, cfg)
    else:
        metrics = {}
        if model_path is not None:
            model = load_model(model_path)
            raw = _load(cfg, "eval_path" if cfg.eval_path is not None else "path")
            data = _scaled_for_model(raw.subset(raw.complete_rows()), model)
            pred = hdmr_predict(model, data.X)
            metrics["rmse"] = rmse(pred, data.y)
            if model.scaler is not None:
                metrics["rmse_raw"] = rmse(_unscale_target(model, pred), ds.unscale(data.y, model.scaler))
            metrics["n_rows"] = data.M
        if cfg.report is not None or cfg.truth_path is not None:
            names = _load(cfg).column_names if cfg.path is not None else None
            report = require_file(cfg, "report")
            truth_file = require_file(cfg, "truth_path")
            if names is None:
                raise ConfigError("datasets.path", "needed to resolve column names")
            truth = ds.MissingRecord.load(truth_file, names)
            chosen = read_imputation_report(report, names)
            per_var = {}
            for r, c, v in zip(truth.rows, truth.columns, truth.values):
                if (int(r), int(c)) in chosen:
                    per_var.setdefault(names[c], ([], []))
                    per_var[names[c]][0].append(chosen[(int(r), int(c))])
                    per_var[names[c]][1].append(v)
            metrics["imputation"] = {k: {"count": len(a), "rmse": rmse(a, b)} for k, (a, b) in per_var.items()}
        if not metrics:
            raise ConfigError("--model", "eval needs --model, an imputation report, or --experiment")
    out = cfg.out / "metrics.json"
    _write_json(out, metrics)
    return {"metrics": out}


def run_experiment(name: str, cfg: RunConfig) -> dict:
    seed = cfg.seed
    if name.startswith("water-"):
        kind = {"water-1d": "1d", "water-2d": "2d", "water-2dstar": "2d*"}[name]
        path = require_file(cfg, "path")
        return ex.water_models(path, seed=seed, kinds=(kind,))
    if name == "additive-fit":
        metrics, _ = ex.additive_fit(seed)
        return metrics
    if name.endswith("-impute"):
        return ex.impute_protocol(name.split("-")[0], seed, policy=_policy(cfg))
    if name == "quartic-candidates":
        return ex.quartic_candidates(seed, num_subintervals=cfg.subintervals)
    if name in ex.STRESS_CASES:
        return ex.stress_case(name, seed, policy=_policy(cfg))
    raise ConfigError("--experiment", f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rshdmr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("gen", "generate a synthetic dataset"),
        ("fit", "train an HDMR model"),
        ("predict", "predict targets (and std) with a trained model"),
        ("impute", "fill single missing values per row"),
        ("eval", "score a model, an imputation, or a built-in experiment"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS,
                       help="log progress to stderr")
        p.add_argument("--config", type=Path, help="INI run configuration")
        p.add_argument("--seed", type=int, help="override run.seed")
        p.add_argument("--out", type=Path, help="override run.out (output directory)")
        p.add_argument("--data", type=Path, help="override datasets.path")
        if name in ("predict", "impute", "eval"):
            p.add_argument("--model", type=Path, help="model file written by fit")
        if name == "eval":
            p.add_argument("--experiment", choices=EXPERIMENTS, help="run a built-in reproduction")
    return parser


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config is not None else RunConfig()
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed", "must be >= 0")
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, out=args.out)
    if args.data is not None:
        cfg = replace(cfg, path=args.data)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve_config(args)
        cfg.out.mkdir(parents=True, exist_ok=True)
        model_path = getattr(args, "model", None)
        if args.command in ("predict", "impute") and model_path is None:
            raise ConfigError("--model", f"required for {args.command}")
        if model_path is not None and not model_path.is_file():
            raise ConfigError("--model", f"file not found: {model_path}")
        if args.command == "gen":
            written = cmd_gen(cfg)
        elif args.command == "fit":
            written = cmd_fit(cfg)
        elif args.command == "predict":
            written = cmd_predict(cfg, model_path)
        elif args.command == "impute":
            written = cmd_impute(cfg, model_path)
        else:
            written = cmd_eval(cfg, model_path, args.experiment)
        (cfg.out / "run_config.ini").write_text(to_text(cfg))
    except (InputError, NumericalError) as exc:
        print(f"rshdmr {args.command}: error: {exc}", file=sys.stderr)
        return 2
    for label, path in written.items():
        print(f"{label}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
