"""Robust and fair credit scoring.

Five logistic-regression-family classifiers over a shared preprocessing and
evaluation pipeline: plain (LR), L2-regularized (LRL2), fairness-penalized
(FLR), Wasserstein distributionally robust (DRLR), and distributionally
robust + fair (DRFLR). The robust families are trained through exact
exponential-cone reformulations with certified solves.
"""

__version__ = "0.1.0"

from .dataset import (Dataset, MarginalTable, PreprocessConfig, RawTable,
                      TableSchema, derive_sensitive, drop_subgroup_fraction,
                      kfold_split, lasso_select, load_csv, load_german_credit,
                      marginals, preprocess, subsample_preserving)
from .dro import (DroDiagnostics, HyperParams, build_drflr, build_drlr,
                  eta_max, fit_drflr, fit_drlr, fit_flr)
from .errors import (ConfigError, DataError, MissingColumnError, RfsError,
                     SolverError, UndefinedMetricError)
from .evaluation import (EtaRule, EvalReport, ExperimentSpec, ShiftCurve,
                         cross_validate, grid_search,
                         marginal_shift_experiment, sweep)
from .metrics import leo, roc_auc, sp, youden_threshold
from .nominal import (FittedModel, OptimizerOptions, check_gradient, fit_lr,
                      fit_lrl2, logloss, predict_proba)

__all__ = [
    "__version__",
    "Dataset", "MarginalTable", "PreprocessConfig", "RawTable", "TableSchema",
    "derive_sensitive", "drop_subgroup_fraction", "kfold_split", "lasso_select",
    "load_csv", "load_german_credit", "marginals", "preprocess",
    "subsample_preserving",
    "DroDiagnostics", "HyperParams", "build_drflr", "build_drlr", "eta_max",
    "fit_drflr", "fit_drlr", "fit_flr",
    "ConfigError", "DataError", "MissingColumnError", "RfsError", "SolverError",
    "UndefinedMetricError",
    "EtaRule", "EvalReport", "ExperimentSpec", "ShiftCurve", "cross_validate",
    "grid_search", "marginal_shift_experiment", "sweep",
    "leo", "roc_auc", "sp", "youden_threshold",
    "FittedModel", "OptimizerOptions", "check_gradient", "fit_lr", "fit_lrl2",
    "logloss", "predict_proba",
]
