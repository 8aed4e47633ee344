"""Command-line entry point: declarative JSON config in, CSV/JSON artifacts out.

Commands: prep, train, cv, table1, sweep, shift. Every command validates the
config against CONFIG_SCHEMA before doing any work (unknown keys rejected)
and is idempotent: identical config + seed + single-threaded run rewrites
byte-identical CSV outputs; timestamps only ever land in manifest.json.

Exit codes: 0 success, 2 config/validation error, 3 data error, 4 solver failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .dataset import (PreprocessConfig, TableSchema, derive_sensitive,
                      load_csv, load_german_credit, marginals_from_arrays,
                      preprocess, stratified_subsample_indices)
from .errors import ConfigError, DataError, RfsError, SolverError
from .evaluation import (EtaRule, ExperimentSpec, cross_validate, dataset_hash,
                         fit_family, format_value, grid_search,
                         marginal_shift_experiment, report_rows, shift_rows,
                         sweep, write_csv)

log = logging.getLogger("rfs.cli")

_PREPROCESS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "max_categories": {"type": "integer", "minimum": 1},
        "age_threshold": {"type": "number", "exclusiveMinimum": 0},
        "lasso_lambda": {"oneOf": [{"type": "number", "minimum": 0},
                                   {"const": "auto"}, {"type": "null"}]},
        "lasso_scope": {"enum": ["fold", "global"]},
        "subsample_n": {"oneOf": [{"type": "integer", "minimum": 1}, {"type": "null"}]},
        "seed": {"type": "integer"},
    },
}

_HP_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "rho": {"type": "number", "minimum": 0},
        "kappa_s": {"oneOf": [{"type": "number", "minimum": 0}, {"const": "inf"}]},
        "kappa_y": {"oneOf": [{"type": "number", "minimum": 0}, {"const": "inf"}]},
        "eta": {"oneOf": [{"type": "number", "minimum": 0}, {"type": "null"}]},
        "lam": {"type": "number", "minimum": 0},
        "halve_kappa_y": {"type": "boolean"},
    },
}

_GRID_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        name: {"type": "array", "minItems": 1}
        for name in ("rho", "kappa_s", "kappa_y", "eta", "lam")
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["dataset"],
    "properties": {
        "dataset": {
            "type": "object",
            "additionalProperties": False,
            "required": ["id"],
            "properties": {
                "id": {"type": "string", "minLength": 1},
                "path": {"oneOf": [{"type": "string"}, {"type": "null"}]},
                "schema": {"oneOf": [{"type": "string"}, {"type": "object"}, {"type": "null"}]},
                "preprocess": _PREPROCESS_SCHEMA,
            },
        },
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "family": {"enum": ["LR", "LRL2", "FLR", "DRLR", "DRFLR"]},
                "hyperparams": _HP_SCHEMA,
                "grid": _GRID_SCHEMA,
            },
        },
        "eval": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "k": {"type": "integer", "minimum": 2},
                "seed": {"type": "integer"},
                "threshold_on": {"enum": ["test", "train"]},
                "eta_rule": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "mode": {"enum": ["fixed_fraction", "grid"]},
                        "fraction": {"type": "number", "minimum": 0, "maximum": 1},
                    },
                },
            },
        },
        "experiment": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["cv", "sweep", "shift", "table1"]},
                "params": {"type": "object"},
            },
        },
        "output_dir": {"type": "string"},
    },
}


def load_config(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"no such config file: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        raise ConfigError(f"config rejected: {e.message} (at {'/'.join(map(str, e.path))})") from None
    return doc


def _parse_hp(hp: dict) -> dict:
    out = dict(hp)
    for k in ("kappa_s", "kappa_y"):
        if out.get(k) == "inf":
            out[k] = float("inf")
    return out


def load_dataset(cfg: dict, age_threshold: float):
    ds_cfg = cfg["dataset"]
    if ds_cfg["id"].lower() in ("gc", "german", "german_credit"):
        raw = load_german_credit(ds_cfg.get("path"))
    else:
        if not ds_cfg.get("path") or ds_cfg.get("schema") is None:
            raise ConfigError(f"dataset {ds_cfg['id']!r} needs both path and schema")
        schema = ds_cfg["schema"]
        if isinstance(schema, str):
            schema = json.loads(Path(schema).read_text())
        raw = load_csv(ds_cfg["path"], TableSchema.from_dict(schema))
    sub_n = ds_cfg.get("preprocess", {}).get("subsample_n")
    if sub_n:
        if sub_n > raw.n:
            raise DataError(f"subsample_n={sub_n} exceeds dataset size {raw.n}")
        s_raw = derive_sensitive(raw, age_threshold)
        seed = ds_cfg.get("preprocess", {}).get("seed", 0)
        raw = raw.subset(stratified_subsample_indices(raw.y, s_raw, sub_n, seed))
    return raw


def build_spec(cfg: dict, family: str, args) -> ExperimentSpec:
    prep_doc = dict(cfg["dataset"].get("preprocess", {}))
    prep_doc.pop("subsample_n", None)  # applied at load time
    ev = cfg.get("eval", {})
    rule = ev.get("eta_rule", {})
    return ExperimentSpec(
        family=family,
        preprocess=PreprocessConfig(**prep_doc),
        grid={k: list(v) for k, v in cfg.get("model", {}).get("grid", {}).items()},
        k=ev.get("k", 5),
        seed=args.seed if args.seed is not None else ev.get("seed", 7),
        eta_rule=EtaRule(rule.get("mode", "fixed_fraction"), rule.get("fraction", 0.9)),
        threshold_on=ev.get("threshold_on", "test"),
        threads=args.threads,
    )


def _outdir(cfg, args) -> Path:
    out = Path(args.output or cfg.get("output_dir", "rfs_out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, command, cfg, raw, extra=None):
    doc = {
        "command": command,
        "config": cfg,
        "dataset_hash": dataset_hash(raw),
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    doc.update(extra or {})
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True, default=str))


def cmd_prep(cfg, args):
    prep_doc = dict(cfg["dataset"].get("preprocess", {}))
    prep_doc.pop("subsample_n", None)
    pcfg = PreprocessConfig(**prep_doc)
    raw = load_dataset(cfg, pcfg.age_threshold)
    ds = preprocess(raw, pcfg, fit_on=np.arange(raw.n))
    out = _outdir(cfg, args)

    header = ["y", "s"] + ds.feature_names
    rows = []
    for i in range(ds.n):
        rows.append([ds.y[i], ds.s[i]] + [format_value(float(v)) for v in ds.X[i]])
    write_csv(out / "prepped.csv", header, rows)

    marg = marginals_from_arrays(ds.y, ds.s)
    stats = {
        "n": ds.n, "m": ds.m,
        "marginals": marg.as_dict(),
        "marginals_sum": float(marg.p.sum()),
        "feature_names": ds.feature_names,
        "lasso_survivors": ds.m - 1,
        "standardization": {k: list(v) for k, v in ds.standardization.items()},
    }
    (out / "prep_stats.json").write_text(json.dumps(stats, indent=2, sort_keys=True))
    _write_manifest(out, "prep", cfg, raw)
    print(f"prepped {ds.n} rows x {ds.m} columns -> {out}")
    return 0


def cmd_train(cfg, args):
    if "model" not in cfg or "family" not in cfg.get("model", {}):
        raise ConfigError("train needs model.family")
    family = cfg["model"]["family"]
    spec = build_spec(cfg, family, args)
    raw = load_dataset(cfg, spec.preprocess.age_threshold)
    ds = preprocess(raw, spec.preprocess, fit_on=np.arange(raw.n))
    hp = _parse_hp(cfg.get("model", {}).get("hyperparams", {}))
    model, diag = fit_family(family, ds.X, ds.y, ds.s, hp, spec.eta_rule)
    model.feature_names = ds.feature_names
    model.standardization_params = {k: list(v) for k, v in ds.standardization.items()}
    model.seed = spec.seed
    model.provenance.update({"dataset_hash": dataset_hash(raw)})
    if diag is not None:
        model.provenance["diagnostics"] = {
            "status": diag.status, "objective": diag.objective, "psi": diag.psi}
    out = _outdir(cfg, args)
    (out / "model.json").write_text(model.to_json())
    _write_manifest(out, "train", cfg, raw)
    print(f"trained {family} -> {out / 'model.json'}")
    return 0


def _require_kind(cfg, kind):
    got = cfg.get("experiment", {}).get("kind")
    if got is not None and got != kind:
        raise ConfigError(f"config experiment.kind is {got!r}, command expects {kind!r}")


def cmd_cv(cfg, args):
    _require_kind(cfg, "cv")
    if "model" not in cfg or "family" not in cfg.get("model", {}):
        raise ConfigError("cv needs model.family")
    family = cfg["model"]["family"]
    spec = build_spec(cfg, family, args)
    raw = load_dataset(cfg, spec.preprocess.age_threshold)
    out = _outdir(cfg, args)
    model_cfg = cfg.get("model", {})
    if model_cfg.get("grid"):
        best_hp, report, _ = grid_search(raw, spec)
        (out / "best_hp.json").write_text(json.dumps(best_hp, indent=2, sort_keys=True))
    else:
        report = cross_validate(raw, spec, _parse_hp(model_cfg.get("hyperparams", {})))
    dsid = cfg["dataset"]["id"]
    write_csv(out / "cv_results.csv", ["dataset", "model", "fold", "metric", "value"],
              report_rows(dsid, family, report))
    (out / "cv_summary.json").write_text(json.dumps(
        {"family": family, "aggregates": report.aggregates,
         "provenance": report.provenance}, indent=2, sort_keys=True))
    _write_manifest(out, "cv", cfg, raw)
    print(f"cv done: ROC mean {format_value(report.metric_mean('roc'))} -> {out}")
    return 0


def cmd_table1(cfg, args):
    _require_kind(cfg, "table1")
    params = cfg.get("experiment", {}).get("params", {})
    models = params.get("models", {
        "LR": {}, "LRL2": {"lam": 0.001},
        "FLR": {}, "DRLR": {"rho": 0.01, "kappa_y": 0.2},
        "DRFLR": {"rho": 0.01, "kappa_s": 0.2, "kappa_y": 0.2},
    })
    spec0 = build_spec(cfg, "LR", args)
    raw = load_dataset(cfg, spec0.preprocess.age_threshold)
    dsid = cfg["dataset"]["id"]
    out = _outdir(cfg, args)

    cells = {}
    long_rows = []
    for family, hp in models.items():
        spec = build_spec(cfg, family, args)
        try:
            report = cross_validate(raw, spec, _parse_hp(hp))
            long_rows.extend(report_rows(dsid, family, report))
            for metric in ("roc", "leo", "sp"):
                mean = report.metric_mean(metric)
                std = report.metric_std(metric)
                cells[(metric, family)] = ("NA" if mean is None
                                           else f"{mean:.3f}±{std:.3f}")
        except RfsError as e:
            log.error("table1 cell %s failed: %s", family, e)
            for metric in ("roc", "leo", "sp"):
                cells[(metric, family)] = "NA"
    rows = [[metric, family, cells[(metric, family)]]
            for metric in ("roc", "leo", "sp") for family in models]
    write_csv(out / "table1.csv", ["metric", "model", dsid], rows)
    write_csv(out / "table1_folds.csv", ["dataset", "model", "fold", "metric", "value"],
              long_rows)
    _write_manifest(out, "table1", cfg, raw)
    print(f"table1 -> {out / 'table1.csv'}")
    return 0


def cmd_sweep(cfg, args):
    _require_kind(cfg, "sweep")
    params = cfg.get("experiment", {}).get("params", {})
    parameter = params.get("parameter")
    if parameter not in ("rho", "eta", "kappa", "kappa_y", "kappa_s", "lam"):
        raise ConfigError(f"sweep needs params.parameter, got {parameter!r}")
    family = cfg.get("model", {}).get("family", "DRFLR")
    spec = build_spec(cfg, family, args)
    raw = load_dataset(cfg, spec.preprocess.age_threshold)
    fixed_hp = _parse_hp(cfg.get("model", {}).get("hyperparams", {}))
    if parameter == "kappa":
        grid = (params.get("kappa_y_grid") or [0.1, 0.2, 0.4, 0.8],
                params.get("kappa_s_grid") or [0.1, 0.2, 0.4, 0.8])
        header = ["kappa_y", "kappa_s"]
    else:
        if not params.get("grid"):
            raise ConfigError("sweep needs params.grid")
        grid = list(params["grid"])
        header = [parameter]
    rows = sweep(raw, spec, parameter, grid, fixed_hp)
    out = _outdir(cfg, args)
    metric_cols = [f"{m}_{s}" for m in ("roc", "leo", "sp") for s in ("mean", "std")]
    csv_rows = [[format_value(r.get(h)) for h in header] +
                [format_value(r.get(c)) for c in metric_cols] for r in rows]
    write_csv(out / f"sweep_{parameter}.csv", header + metric_cols, csv_rows)
    _write_manifest(out, "sweep", cfg, raw, {"parameter": parameter})
    print(f"sweep {parameter} ({len(rows)} points) -> {out}")
    return 0


def cmd_shift(cfg, args):
    _require_kind(cfg, "shift")
    params = cfg.get("experiment", {}).get("params", {})
    q_grid = params.get("q_grid", [round(0.1 * i, 1) for i in range(10)])
    models = params.get("models", ["LR", "DRLR", "DRFLR"])
    fixed_hp = {k: _parse_hp(v) for k, v in params.get("hyperparams", {"*": {}}).items()}
    family = cfg.get("model", {}).get("family", models[0])
    spec = build_spec(cfg, family, args)
    raw = load_dataset(cfg, spec.preprocess.age_threshold)
    curve = marginal_shift_experiment(raw, spec, models, q_grid, fixed_hp)
    dsid = cfg["dataset"]["id"]
    out = _outdir(cfg, args)
    write_csv(out / "shift.csv", ["dataset", "model", "q", "fold", "metric", "value"],
              shift_rows(dsid, curve))
    _write_manifest(out, "shift", cfg, raw, {"q_grid": q_grid, "models": models})
    print(f"shift ({len(models)} models x {len(q_grid)} q) -> {out}")
    return 0


COMMANDS = {
    "prep": cmd_prep,
    "train": cmd_train,
    "cv": cmd_cv,
    "table1": cmd_table1,
    "sweep": cmd_sweep,
    "shift": cmd_shift,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rfs",
        description="Robust and fair credit-scoring experiments from JSON configs")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="path to the run config JSON")
    parser.add_argument("--output", default=None, help="output directory override")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    parser.add_argument("--threads", type=int, default=1, help="worker pool size")
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)

    level = os.environ.get("RFS_LOG", "DEBUG" if args.verbose else "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")

    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    except SolverError as e:
        print(f"solver failure: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
