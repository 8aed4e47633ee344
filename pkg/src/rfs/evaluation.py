"""Cross-validation, grid search, hyperparameter sweeps and the
marginal-shift robustness experiment.

Per fold, preprocessing statistics are fit on the training indices only, the
model is fit on the training rows, scores are computed on the untouched test
fold, and the classification threshold defaults to the Youden point of the
test scores. Folds whose fairness metrics are undefined (an empty defaulter
subgroup) are flagged and left out of the aggregates with a warning.

All randomness is derived from (seed, fold, q), so parallel execution over a
bounded worker pool reproduces the sequential results.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataset import (Dataset, PreprocessConfig, RawTable, derive_sensitive,
                      drop_cell_indices, marginals_from_arrays, preprocess,
                      stratified_kfold_indices)
from .dro import HyperParams, eta_max, fit_drflr, fit_drlr, fit_flr
from .errors import RfsError, UndefinedMetricError
from .metrics import leo, roc_auc, sp, youden_threshold
from .nominal import FAMILIES, fit_lr, fit_lrl2

DEFAULT_GRIDS = {
    "rho": [0.0, 0.001, 0.005, 0.01, 0.05, 0.1],
    "kappa_s": [0.1, 0.2, 0.4, 0.8],
    "kappa_y": [0.1, 0.2, 0.4, 0.8],
    "lam": list(np.logspace(-4, 1, 7)),
    "q": [round(0.1 * i, 1) for i in range(10)],
}


@dataclass
class EtaRule:
    mode: str = "fixed_fraction"   # "fixed_fraction" | "grid"
    fraction: float = 0.9

    def __post_init__(self):
        if self.mode not in ("fixed_fraction", "grid"):
            raise ValueError(f"unknown eta rule {self.mode!r}")
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("eta fraction must lie in [0, 1]")


@dataclass
class ExperimentSpec:
    family: str
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    grid: dict = field(default_factory=dict)
    k: int = 5
    seed: int = 7
    eta_rule: EtaRule = field(default_factory=EtaRule)
    threshold_on: str = "test"    # "test" | "train"
    threads: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.threshold_on not in ("test", "train"):
            raise ValueError("threshold_on must be 'test' or 'train'")
        for name, values in self.grid.items():
            if not values:
                raise ValueError(f"empty grid for {name!r}")


@dataclass
class EvalReport:
    family: str
    hyperparams: dict
    per_fold: list
    aggregates: dict
    provenance: dict

    def metric_mean(self, name):
        return self.aggregates[name]["mean"]

    def metric_std(self, name):
        return self.aggregates[name]["std"]


@dataclass
class ShiftCurve:
    q_grid: list
    models: list
    points: dict      # (model, q) -> {"per_fold": [...], "aggregates": {...}}
    provenance: dict


def _hash_obj(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()[:16]


def dataset_hash(raw: RawTable) -> str:
    h = hashlib.sha256()
    for name in raw.order:
        h.update(name.encode())
        col = raw.columns[name]
        h.update(np.asarray(col, dtype="U32" if col.dtype == object else col.dtype).tobytes())
    h.update(raw.y.tobytes())
    return h.hexdigest()[:16]


def resolve_eta(hp: dict, rule: EtaRule, train_marginals) -> float:
    if hp.get("eta") is not None:
        return float(hp["eta"])
    if rule.mode != "fixed_fraction":
        raise RfsError("eta must come from the grid when the eta rule is 'grid'")
    return rule.fraction * eta_max(train_marginals)


def fit_family(family, X, y, s, hp: dict, eta_rule: EtaRule | None = None):
    """Dispatch one model fit; returns (model, diagnostics-or-None).

    For FLR/DRFLR, a missing eta resolves through the eta rule against the
    training marginals (the paper's fixed-fraction-of-eta-max convention).
    """
    rule = eta_rule or EtaRule()
    if family == "LR":
        return fit_lr(X, y), None
    if family == "LRL2":
        return fit_lrl2(X, y, float(hp.get("lam", 0.0))), None
    if family == "DRLR":
        params = HyperParams(rho=float(hp.get("rho", 0.0)),
                             kappa_y=float(hp.get("kappa_y", math.inf)),
                             halve_kappa_y=bool(hp.get("halve_kappa_y", False)))
        return fit_drlr(X, y, params)
    marg = marginals_from_arrays(y, s)
    eta = resolve_eta(hp, rule, marg)
    if family == "FLR":
        return fit_flr(X, y, s, eta=eta, marginals=marg)
    if family == "DRFLR":
        params = HyperParams(rho=float(hp.get("rho", 0.0)),
                             kappa_s=float(hp.get("kappa_s", 0.0)),
                             kappa_y=float(hp.get("kappa_y", math.inf)),
                             eta=eta, marginals=marg,
                             halve_kappa_y=bool(hp.get("halve_kappa_y", False)))
        return fit_drflr(X, y, s, params)
    raise RfsError(f"unknown family {family!r}")


def _fold_metrics(model, ds: Dataset, train, test, threshold_on):
    scores_test = model.predict_proba(ds.X[test])
    y_test, s_test = ds.y[test], ds.s[test]
    out = {}
    flags = []

    def guarded(name, fn):
        try:
            out[name] = fn()
        except UndefinedMetricError as e:
            out[name] = None
            flags.append(f"{name}: {e}")

    if threshold_on == "train":
        guarded("threshold",
                lambda: youden_threshold(model.predict_proba(ds.X[train]), ds.y[train]))
    else:
        guarded("threshold", lambda: youden_threshold(scores_test, y_test))
    thr = out.get("threshold")
    guarded("roc", lambda: roc_auc(scores_test, y_test))
    guarded("leo", lambda: leo(scores_test, y_test, s_test))
    if thr is None:
        out["sp"] = None
        flags.append("sp: threshold undefined")
    else:
        guarded("sp", lambda: sp(scores_test, y_test, s_test, thr))
    out["flags"] = flags
    return out


def _aggregate(per_fold, metrics=("roc", "leo", "sp")) -> dict:
    agg = {}
    for name in metrics:
        vals = [f[name] for f in per_fold if f.get(name) is not None]
        if not vals:
            agg[name] = {"mean": None, "std": None, "folds_used": 0}
            continue
        agg[name] = {
            "mean": float(np.mean(vals)),
            "std": float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0,
            "folds_used": len(vals),
        }
    return agg


def run_tasks(tasks, threads=1):
    """Evaluate a list of thunks with a bounded worker pool; results keep
    task order regardless of completion order."""
    if threads <= 1 or len(tasks) <= 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(t) for t in tasks]
        return [f.result() for f in futures]


def _global_feature_mask(raw: RawTable, cfg: PreprocessConfig):
    """Feature names selected once on the full data; the comparison-only
    'global' lasso scope imposes them on every fold (deliberately leaky)."""
    if cfg.lasso_scope != "global" or cfg.lasso_lambda is None:
        return None
    return list(preprocess(raw, cfg, fit_on=np.arange(raw.n)).feature_names)


def cross_validate(raw: RawTable, spec: ExperimentSpec, hp: dict) -> EvalReport:
    """k-fold evaluation of one (family, hyperparams) point."""
    cfg = spec.preprocess
    s_raw = derive_sensitive(raw, cfg.age_threshold)
    folds = stratified_kfold_indices(raw.y, s_raw, spec.k, spec.seed)
    keep = _global_feature_mask(raw, cfg)

    def one_fold(fold_id, train, test):
        ds = preprocess(raw, cfg, fit_on=train, keep_features=keep)
        model, diag = fit_family(spec.family, ds.X[train], ds.y[train], ds.s[train],
                                 hp, spec.eta_rule)
        rec = {"fold": fold_id}
        rec.update(_fold_metrics(model, ds, train, test, spec.threshold_on))
        rec["eta"] = model.hyperparams.get("eta")
        if diag is not None:
            rec["diagnostics"] = {"status": diag.status, "objective": diag.objective,
                                  "psi": diag.psi, "iterations": diag.iterations,
                                  "solve_time": diag.solve_time}
        return rec

    tasks = [(lambda f=f, tr=tr, te=te: one_fold(f, tr, te))
             for f, (tr, te) in enumerate(folds)]
    per_fold = run_tasks(tasks, spec.threads)
    for rec in per_fold:
        for flag in rec["flags"]:
            warnings.warn(f"fold {rec['fold']} metric undefined ({flag}); "
                          "excluded from aggregates", RuntimeWarning)
    return EvalReport(
        family=spec.family, hyperparams=dict(hp), per_fold=per_fold,
        aggregates=_aggregate(per_fold),
        provenance={
            "seed": spec.seed, "k": spec.k, "threshold_on": spec.threshold_on,
            "dataset_hash": dataset_hash(raw),
            "config_hash": _hash_obj({"family": spec.family, "hp": hp, "k": spec.k,
                                      "seed": spec.seed, "preprocess": vars(cfg),
                                      "eta_rule": vars(spec.eta_rule),
                                      "threshold_on": spec.threshold_on}),
        })


_TIE_ORDER = ("rho", "eta", "lam", "kappa_s", "kappa_y")


def grid_search(raw: RawTable, spec: ExperimentSpec):
    """Evaluate every grid point; the winner has the best mean ROC, with ties
    broken toward the less aggressive model (smaller rho, then smaller eta)."""
    if not spec.grid:
        raise RfsError("grid_search needs a nonempty grid")
    names = sorted(spec.grid)
    points = [dict(zip(names, combo)) for combo in itertools.product(*(spec.grid[n] for n in names))]
    reports, failures = {}, {}
    for hp in points:
        key = tuple(sorted(hp.items()))
        try:
            reports[key] = cross_validate(raw, spec, hp)
        except RfsError as e:
            failures[key] = str(e)
    if not reports:
        raise RfsError(f"every grid point failed: {failures}")

    def sort_key(item):
        key, rep = item
        hp = dict(key)
        mean_roc = rep.metric_mean("roc")
        tie = tuple(float(hp.get(p, 0.0) or 0.0) for p in _TIE_ORDER)
        return (-(mean_roc if mean_roc is not None else -np.inf),) + tie

    best_key, best_report = min(reports.items(), key=sort_key)
    return dict(best_key), best_report, reports


def sweep(raw: RawTable, spec: ExperimentSpec, parameter: str, grid, fixed_hp: dict):
    """Figure-backing table: metrics as one hyperparameter (or the kappa pair)
    moves across a grid with everything else held fixed."""
    rows = []
    if parameter == "kappa":
        ky_grid, ks_grid = grid
        combos = [{"kappa_y": ky, "kappa_s": ks} for ky in ky_grid for ks in ks_grid]
    elif parameter in ("rho", "eta", "kappa_y", "kappa_s", "lam"):
        combos = [{parameter: v} for v in grid]
    else:
        raise RfsError(f"cannot sweep over {parameter!r}")
    for combo in combos:
        hp = dict(fixed_hp)
        hp.update(combo)
        report = cross_validate(raw, spec, hp)
        row = dict(combo)
        for metric in ("roc", "leo", "sp"):
            row[f"{metric}_mean"] = report.metric_mean(metric)
            row[f"{metric}_std"] = report.metric_std(metric)
        rows.append(row)
    return rows


def marginal_shift_experiment(raw: RawTable, spec: ExperimentSpec, models: list,
                              q_grid, fixed_hp: dict) -> ShiftCurve:
    """Drop a growing fraction of protected non-defaulters from the training
    side of each fold, refit every model, and evaluate on the untouched test
    fold. Hyperparameters stay fixed across q, per the experiment design."""
    q_grid = list(q_grid)
    if any(b <= a for a, b in zip(q_grid, q_grid[1:])):
        raise RfsError("q_grid must be strictly increasing")
    if any(not 0.0 <= q < 1.0 for q in q_grid):
        raise RfsError("q values must lie in [0, 1)")
    cfg = spec.preprocess
    s_raw = derive_sensitive(raw, cfg.age_threshold)
    folds = stratified_kfold_indices(raw.y, s_raw, spec.k, spec.seed)
    keep = _global_feature_mask(raw, cfg)

    def one_point(fold_id, train, test, q):
        if q > 0:
            drop_seed = np.random.default_rng([spec.seed, fold_id, int(round(q * 1000))])
            keep_local = drop_cell_indices(raw.y[train], s_raw[train], q, drop_seed)
            train_q = train[keep_local]
        else:
            train_q = train
        ds = preprocess(raw, cfg, fit_on=train_q, keep_features=keep)
        out = {}
        for family in models:
            fam_spec_hp = dict(fixed_hp.get(family, fixed_hp.get("*", {})))
            try:
                model, _ = fit_family(family, ds.X[train_q], ds.y[train_q],
                                      ds.s[train_q], fam_spec_hp, spec.eta_rule)
                rec = _fold_metrics(model, ds, train_q, test, spec.threshold_on)
            except (RfsError, ValueError) as e:
                rec = {"roc": None, "leo": None, "sp": None, "threshold": None,
                       "flags": [f"fit failed: {e}"]}
            rec["fold"] = fold_id
            out[family] = rec
        return out

    tasks = [(lambda f=f, tr=tr, te=te, q=q: (f, q, one_point(f, tr, te, q)))
             for q in q_grid for f, (tr, te) in enumerate(folds)]
    results = run_tasks(tasks, spec.threads)

    points = {}
    for family in models:
        for q in q_grid:
            per_fold = [rec[family] for f, qq, rec in results if qq == q]
            per_fold.sort(key=lambda r: r["fold"])
            points[(family, q)] = {"per_fold": per_fold, "aggregates": _aggregate(per_fold)}
    return ShiftCurve(q_grid=q_grid, models=list(models), points=points,
                      provenance={"seed": spec.seed, "k": spec.k,
                                  "dataset_hash": dataset_hash(raw),
                                  "fixed_hp": fixed_hp})


# ---------------------------------------------------------------------------
# deterministic report serialization (CSV long format + JSON summary)


def format_value(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def report_rows(dataset_id, model, report: EvalReport):
    """Long-format rows: dataset, model, fold, metric, value."""
    rows = []
    for rec in report.per_fold:
        for metric in ("roc", "leo", "sp", "threshold"):
            rows.append((dataset_id, model, rec["fold"], metric, format_value(rec.get(metric))))
    return rows


def shift_rows(dataset_id, curve: ShiftCurve):
    rows = []
    for family in curve.models:
        for q in curve.q_grid:
            for rec in curve.points[(family, q)]["per_fold"]:
                for metric in ("roc", "leo", "sp"):
                    rows.append((dataset_id, family, format_value(q), rec["fold"],
                                 metric, format_value(rec.get(metric))))
    return rows


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(c) for c in row) + "\n")
