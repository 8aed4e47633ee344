"""Credit-data ingestion and preprocessing.

Pipeline: delimited text -> typed RawTable -> (one-hot encoding, median
imputation, z-standardization, lasso feature selection) -> Dataset with a
trailing intercept column, binary default labels y and protected-group
vector s (1 = age below the configured threshold).

Every statistic used by the transform (medians, category ranks, means and
scales, the lasso mask) is computed from the ``fit_on`` rows only and then
applied to all rows, so fold evaluation stays leak-free.
"""
from __future__ import annotations

import csv
import logging
import os
import warnings
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import ConfigError, DataError, MissingColumnError

log = logging.getLogger("rfs.dataset")

MISSING_MARKERS = ("", "NA", "?")
MISSING_LEVEL = "__missing__"
OTHER_LEVEL = "__other__"
INTERCEPT_NAME = "__intercept__"


@dataclass
class TableSchema:
    """Declarative typing for a delimited file: column kinds plus the target
    and age column names and the raw value that maps to y = 1 (default)."""
    columns: dict            # name -> "numeric" | "categorical"
    target: str
    age: str
    positive: str            # raw target value meaning default
    delimiter: str = ","
    missing: tuple = MISSING_MARKERS

    @classmethod
    def from_dict(cls, doc: dict) -> "TableSchema":
        try:
            return cls(
                columns=dict(doc["columns"]),
                target=doc["target"],
                age=doc["age"],
                positive=str(doc["positive"]),
                delimiter=doc.get("delimiter", ","),
                missing=tuple(doc.get("missing", MISSING_MARKERS)),
            )
        except KeyError as e:
            raise ConfigError(f"schema missing required key: {e}") from e


@dataclass
class RawTable:
    """Typed table: numeric columns are float arrays with NaN for missing,
    categorical columns are object arrays with None for missing."""
    columns: dict
    kinds: dict
    order: list
    y: np.ndarray
    age_column: str
    source: str = ""

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    def subset(self, rows) -> "RawTable":
        rows = np.asarray(rows)
        return RawTable(
            columns={c: v[rows] for c, v in self.columns.items()},
            kinds=dict(self.kinds), order=list(self.order),
            y=self.y[rows], age_column=self.age_column, source=self.source,
        )


@dataclass
class PreprocessConfig:
    max_categories: int = 10
    age_threshold: float = 25.0
    lasso_lambda: object = "auto"   # float, "auto", or None to skip selection
    lasso_scope: str = "fold"       # "fold" refits per training fold; "global" once
    subsample_n: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.max_categories < 1:
            raise ConfigError("max_categories must be >= 1")
        if self.age_threshold <= 0:
            raise ConfigError("age_threshold must be positive")
        if isinstance(self.lasso_lambda, str) and self.lasso_lambda != "auto":
            raise ConfigError(f"lasso_lambda must be a number, 'auto' or null, got {self.lasso_lambda!r}")
        if not isinstance(self.lasso_lambda, str) and self.lasso_lambda is not None \
                and float(self.lasso_lambda) < 0:
            raise ConfigError("lasso_lambda must be nonnegative")
        if self.lasso_scope not in ("fold", "global"):
            raise ConfigError(f"lasso_scope must be 'fold' or 'global', got {self.lasso_scope!r}")


@dataclass
class Dataset:
    """Model-ready design matrix (intercept last), labels and group vector."""
    X: np.ndarray
    y: np.ndarray
    s: np.ndarray
    feature_names: list
    standardization: dict = field(default_factory=dict)  # name -> (mean, scale)
    source: str = ""

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    @property
    def m(self) -> int:
        return int(self.X.shape[1])

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.X[rows], self.y[rows], self.s[rows],
                       list(self.feature_names), dict(self.standardization), self.source)


@dataclass
class MarginalTable:
    """Empirical cell probabilities p[s, y] of the (group, label) cells."""
    p: np.ndarray  # shape (2, 2), indexed [s, y]

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        if self.p.shape != (2, 2) or (self.p < 0).any():
            raise ValueError("marginal table must be a nonnegative 2x2 array")
        if abs(self.p.sum() - 1.0) > 1e-12:
            raise ValueError(f"marginal entries sum to {self.p.sum()!r}, not 1")

    def as_dict(self) -> dict:
        return {f"s{a}y{b}": float(self.p[a, b]) for a in (0, 1) for b in (0, 1)}


# ---------------------------------------------------------------------------
# ingestion


def _type_rows(header, rows, schema: TableSchema, source: str) -> RawTable:
    for name in list(schema.columns) + [schema.target, schema.age]:
        if name not in header:
            raise MissingColumnError(f"column {name!r} not found in {source or 'input'}")
    if schema.age not in schema.columns or schema.columns.get(schema.age) != "numeric":
        raise ConfigError(f"age column {schema.age!r} must be declared numeric")
    idx = {name: header.index(name) for name in header}
    missing = set(schema.missing)
    n = len(rows)

    columns, kinds, order = {}, {}, []
    for name, kind in schema.columns.items():
        j = idx[name]
        raw = [r[j].strip() for r in rows]
        if kind == "numeric":
            vals = np.empty(n, dtype=float)
            for i, cell in enumerate(raw):
                if cell in missing:
                    vals[i] = np.nan
                else:
                    try:
                        vals[i] = float(cell)
                    except ValueError:
                        raise DataError(
                            f"unparseable numeric cell {cell!r} in column {name!r}, row {i}") from None
        elif kind == "categorical":
            vals = np.array([None if cell in missing else cell for cell in raw], dtype=object)
        else:
            raise ConfigError(f"unknown column kind {kind!r} for {name!r}")
        columns[name] = vals
        kinds[name] = kind
        order.append(name)

    jt = idx[schema.target]
    y = np.empty(n, dtype=int)
    for i, r in enumerate(rows):
        cell = r[jt].strip()
        if cell in missing:
            raise DataError(f"missing target value at row {i}")
        y[i] = 1 if cell == schema.positive else 0
    return RawTable(columns=columns, kinds=kinds, order=order, y=y,
                    age_column=schema.age, source=source)


def load_csv(path, schema: TableSchema) -> RawTable:
    """Read an RFC-4180-style delimited file with a header row into a RawTable."""
    if not os.path.exists(path):
        raise DataError(f"no such file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        try:
            header = [c.strip() for c in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        rows = [r for r in reader if any(c.strip() for c in r)]
    for i, r in enumerate(rows):
        if len(r) != len(header):
            raise DataError(f"{path}: row {i} has {len(r)} fields, header has {len(header)}")
    return _type_rows(header, rows, schema, source=str(path))


# ---------------------------------------------------------------------------
# bundled German Credit loader (UCI Statlog wire format: 20 space-separated
# attribute codes plus a 1/2 target, no header row)

GERMAN_COLUMNS = [
    ("checking_status", "categorical"),
    ("duration_months", "numeric"),
    ("credit_history", "categorical"),
    ("purpose", "categorical"),
    ("credit_amount", "numeric"),
    ("savings_status", "categorical"),
    ("employment_since", "categorical"),
    ("installment_rate", "numeric"),
    ("personal_status_sex", "categorical"),
    ("other_debtors", "categorical"),
    ("residence_since", "numeric"),
    ("property", "categorical"),
    ("age_years", "numeric"),
    ("other_installment_plans", "categorical"),
    ("housing", "categorical"),
    ("existing_credits", "numeric"),
    ("job", "categorical"),
    ("num_dependents", "numeric"),
    ("telephone", "categorical"),
    ("foreign_worker", "categorical"),
]

GERMAN_SCHEMA = TableSchema(
    columns={name: kind for name, kind in GERMAN_COLUMNS},
    target="target", age="age_years", positive="2", delimiter=" ",
)

GC_ENV_VAR = "RFS_GC_DATA"


def load_german_credit(path=None) -> RawTable:
    """Load a file in the UCI ``german.data`` format (target 2 = default).

    Resolution order: explicit ``path``, the ``RFS_GC_DATA`` environment
    variable, then the simulated stand-in bundled with the package (see
    ``rfs/data/README.md``; a warning is logged in that case).
    """
    source = path or os.environ.get(GC_ENV_VAR)
    if source:
        if not os.path.exists(source):
            raise DataError(f"no such file: {source}")
        text = open(source).read()
        origin = str(source)
    else:
        text = resources.files("rfs").joinpath("data/german_credit_sim.data").read_text()
        origin = "bundled:german_credit_sim"
        log.warning(
            "using the bundled SIMULATED German-credit-style data; supply the "
            "real UCI german.data via path or %s for authoritative results", GC_ENV_VAR)
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    header = [name for name, _ in GERMAN_COLUMNS] + ["target"]
    for i, r in enumerate(rows):
        if len(r) != len(header):
            raise DataError(f"{origin}: row {i} has {len(r)} fields, expected {len(header)}")
    return _type_rows(header, rows, GERMAN_SCHEMA, source=origin)


# ---------------------------------------------------------------------------
# preprocessing


def derive_sensitive(raw: RawTable, age_threshold: float = 25.0) -> np.ndarray:
    """Protected-group vector: s_i = 1 iff age_i < age_threshold (strict)."""
    age = raw.columns[raw.age_column]
    if np.isnan(age).any():
        raise DataError("age column has missing values; impute before deriving the group")
    return (age < age_threshold).astype(int)


def _fit_categorical_levels(values_fit, max_categories):
    # ties in frequency break by first appearance within the fitting rows
    counts, first_seen = {}, {}
    for pos, v in enumerate(values_fit):
        lev = MISSING_LEVEL if v is None else v
        counts[lev] = counts.get(lev, 0) + 1
        first_seen.setdefault(lev, pos)
    ranked = sorted(counts, key=lambda lev: (-counts[lev], first_seen[lev]))
    return ranked[:max_categories]


def _encode_categorical(values_all, kept_levels):
    n = len(values_all)
    levels = list(kept_levels) + [OTHER_LEVEL]
    pos = {lev: j for j, lev in enumerate(kept_levels)}
    out = np.zeros((n, len(levels)))
    for i, v in enumerate(values_all):
        lev = MISSING_LEVEL if v is None else v
        out[i, pos.get(lev, len(kept_levels))] = 1.0
    return out, levels


def preprocess(raw: RawTable, cfg: PreprocessConfig, fit_on,
               keep_features=None) -> Dataset:
    """Apply the full treatment; statistics come from ``fit_on`` rows only.

    ``keep_features`` (a collection of encoded column names) replaces lasso
    selection when given; the global lasso mode uses it to impose one mask
    across folds.
    """
    fit_idx = np.unique(np.asarray(fit_on, dtype=int))
    if fit_idx.size == 0:
        raise ValueError("fit_on must be nonempty")

    blocks, names, standardization = [], [], {}
    age_imputed = None
    for name in raw.order:
        col = raw.columns[name]
        if raw.kinds[name] == "numeric":
            fit_vals = col[fit_idx]
            finite = fit_vals[~np.isnan(fit_vals)]
            if finite.size == 0:
                raise DataError(f"column {name!r}: all fitting rows missing, cannot take a median")
            med = float(np.median(finite))
            filled = np.where(np.isnan(col), med, col)
            if name == raw.age_column:
                age_imputed = filled
            mean = float(filled[fit_idx].mean())
            scale = float(filled[fit_idx].std())
            if scale < 1e-12:
                scale = 1.0
            blocks.append(((filled - mean) / scale)[:, None])
            names.append(name)
            standardization[name] = (mean, scale)
        else:
            kept = _fit_categorical_levels(col[fit_idx], cfg.max_categories)
            enc, levels = _encode_categorical(col, kept)
            blocks.append(enc)
            names.extend(f"{name}={lev}" for lev in levels)
            for lev in levels:
                standardization[f"{name}={lev}"] = (0.0, 1.0)

    X = np.hstack(blocks)
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite entries after encoding")

    if keep_features is not None:
        wanted = set(keep_features)
        mask = np.array([nm in wanted for nm in names])
        X = X[:, mask]
        names = [nm for nm, keep in zip(names, mask) if keep]
    elif cfg.lasso_lambda is not None:
        X_fit = np.hstack([X[fit_idx], np.ones((fit_idx.size, 1))])
        mask = lasso_select(X_fit, raw.y[fit_idx], cfg.lasso_lambda)[:-1]
        X = X[:, mask]
        names = [nm for nm, keep in zip(names, mask) if keep]

    X = np.hstack([X, np.ones((X.shape[0], 1))])
    names.append(INTERCEPT_NAME)
    standardization[INTERCEPT_NAME] = (0.0, 1.0)
    standardization = {nm: standardization[nm] for nm in names}

    s = (age_imputed < cfg.age_threshold).astype(int)
    return Dataset(X=X, y=raw.y.copy(), s=s, feature_names=names,
                   standardization=standardization, source=raw.source)


# ---------------------------------------------------------------------------
# lasso feature selection (L1-penalized logistic regression, proximal gradient)


def lasso_lambda_max(X, y, penalized) -> float:
    """Smallest penalty that zeroes every penalized weight: ||X^T(y - ybar)||_inf / n."""
    y = np.asarray(y, dtype=float)
    resid = y - y.mean()
    return float(np.abs(X[:, penalized].T @ resid).max() / X.shape[0])


def lasso_fit(X, y, lam, tol=1e-8, max_iter=50000):
    """L1-penalized logistic regression by accelerated proximal gradient.

    The intercept (last column) is never penalized. Converged when the
    minimal-norm subgradient of the composite objective falls below ``tol``
    in the infinity norm.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite entries in X")
    n, m = X.shape
    pen = np.ones(m, dtype=bool)
    pen[-1] = False
    # Lipschitz constant of the smooth part: ||X||_2^2 / (4n)
    L = float(np.linalg.norm(X, 2) ** 2) / (4.0 * n) + 1e-12
    step = 1.0 / L

    from scipy.special import expit

    def grad(w):
        return X.T @ (expit(X @ w) - y) / n

    def prox(v):
        out = v.copy()
        out[pen] = np.sign(v[pen]) * np.maximum(np.abs(v[pen]) - step * lam, 0.0)
        return out

    def subgrad_residual(w, g):
        r = np.abs(g)
        active = pen & (w != 0)
        r[active] = np.abs(g[active] + lam * np.sign(w[active]))
        inactive = pen & (w == 0)
        r[inactive] = np.maximum(np.abs(g[inactive]) - lam, 0.0)
        return float(r.max()) if r.size else 0.0

    w = np.zeros(m)
    v = w.copy()
    t_acc = 1.0
    for it in range(max_iter):
        g_v = grad(v)
        w_new = prox(v - step * g_v)
        # monotone restart keeps the accelerated iterates stable
        if it and _lasso_objective(X, y, w_new, lam, pen) > _lasso_objective(X, y, w, lam, pen):
            v = w.copy()
            t_acc = 1.0
            g_v = grad(v)
            w_new = prox(v - step * g_v)
        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t_acc ** 2)) / 2.0
        v = w_new + ((t_acc - 1.0) / t_next) * (w_new - w)
        w, t_acc = w_new, t_next
        if it % 10 == 0 and subgrad_residual(w, grad(w)) <= tol:
            break
    res = subgrad_residual(w, grad(w))
    if res > tol:
        warnings.warn(f"lasso_fit stopped at max_iter with residual {res:.2e}", RuntimeWarning)
    return w, {"residual": res, "iterations": it + 1}


def _lasso_objective(X, y, w, lam, pen):
    z = X @ w
    return float(np.mean(np.logaddexp(0.0, (1.0 - 2.0 * y) * z))) + lam * float(np.abs(w[pen]).sum())


def lasso_select(X, y, lam) -> np.ndarray:
    """Boolean mask of retained columns (|w_j| > 1e-10; intercept always kept).

    ``lam="auto"`` walks a 10-point logarithmic grid below the analytic
    lambda_max and takes the largest penalty retaining at least min(50, m)
    features; if none qualifies the smallest grid value is used.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    m_feat = X.shape[1] - 1
    if lam == "auto":
        pen = np.ones(X.shape[1], dtype=bool)
        pen[-1] = False
        lam_max = lasso_lambda_max(X, y, pen)
        if lam_max <= 0:
            lam = 0.0
        else:
            want = min(50, m_feat)
            grid = lam_max * np.logspace(0, -4, 10)
            lam = grid[-1]
            for candidate in grid:
                w, _ = lasso_fit(X, y, candidate)
                if int((np.abs(w[:-1]) > 1e-10).sum()) >= want:
                    lam = candidate
                    break
    w, _ = lasso_fit(X, y, float(lam))
    mask = np.abs(w) > 1e-10
    mask[-1] = True
    return mask


# ---------------------------------------------------------------------------
# marginals, sampling and folds


def marginals(ds: Dataset) -> MarginalTable:
    return marginals_from_arrays(ds.y, ds.s)


def marginals_from_arrays(y, s) -> MarginalTable:
    y = np.asarray(y, dtype=int)
    s = np.asarray(s, dtype=int)
    if y.size == 0:
        raise ValueError("marginals need at least one row")
    p = np.zeros((2, 2))
    for a in (0, 1):
        for b in (0, 1):
            p[a, b] = np.count_nonzero((s == a) & (y == b)) / y.size
    return MarginalTable(p)


def _cell_indices(y, s):
    return {(a, b): np.flatnonzero((np.asarray(s) == a) & (np.asarray(y) == b))
            for a in (0, 1) for b in (0, 1)}


def stratified_subsample_indices(y, s, n_target, seed) -> np.ndarray:
    """Per-cell quotas by largest remainder; ascending index order out."""
    y = np.asarray(y, dtype=int)
    s = np.asarray(s, dtype=int)
    n = y.size
    if n_target > n:
        raise ValueError(f"n_target {n_target} exceeds population {n}")
    cells = _cell_indices(y, s)
    keys = sorted(cells)
    quota_exact = {c: n_target * cells[c].size / n for c in keys}
    quota = {c: int(np.floor(quota_exact[c])) for c in keys}
    leftover = n_target - sum(quota.values())
    for c in sorted(keys, key=lambda c: (-(quota_exact[c] - quota[c]), c))[:leftover]:
        quota[c] += 1
    # a nonempty cell must keep at least one row
    starved = [c for c in keys if quota[c] == 0 and cells[c].size > 0]
    for c in starved:
        warnings.warn(f"cell {c} quota rounded to 0 at n_target={n_target}; keeping 1 row",
                      RuntimeWarning)
        quota[c] = 1
        donor = max(keys, key=lambda k: quota[k])
        quota[donor] -= 1
    rng = np.random.default_rng(seed)
    chosen = []
    for c in keys:
        if quota[c] > 0:
            chosen.append(rng.choice(cells[c], size=quota[c], replace=False))
    return np.sort(np.concatenate(chosen)) if chosen else np.empty(0, dtype=int)


def subsample_preserving(ds: Dataset, n_target: int, seed: int) -> Dataset:
    """Stratified subsample whose (s, y) marginals match the input's."""
    return ds.subset(stratified_subsample_indices(ds.y, ds.s, n_target, seed))


def drop_cell_indices(y, s, q, seed, cell=(1, 0)) -> np.ndarray:
    """Surviving row indices after removing floor(q * |cell|) random rows of
    one (s, y) cell; all other rows are untouched."""
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    y = np.asarray(y, dtype=int)
    s = np.asarray(s, dtype=int)
    target = np.flatnonzero((s == cell[0]) & (y == cell[1]))
    k = int(np.floor(q * target.size))
    keep = np.ones(y.size, dtype=bool)
    if k > 0:
        rng = np.random.default_rng(seed)
        keep[rng.choice(target, size=k, replace=False)] = False
    return np.flatnonzero(keep)


def drop_subgroup_fraction(ds: Dataset, q: float, seed: int) -> Dataset:
    """Remove a q-fraction of the protected non-defaulter cell (s=1, y=0)."""
    return ds.subset(drop_cell_indices(ds.y, ds.s, q, seed))


def stratified_kfold_indices(y, s, k, seed):
    """k (train, test) index pairs; test folds partition the rows, differ in
    size by at most one and are stratified by (s, y) cell."""
    y = np.asarray(y, dtype=int)
    s = np.asarray(s, dtype=int)
    n = y.size
    if k < 2:
        raise ValueError("k must be at least 2")
    if n < k:
        raise ValueError(f"cannot make {k} folds from {n} rows")
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    offset = 0
    cells = _cell_indices(y, s)
    for c in sorted(cells):
        idx = cells[c]
        if 0 < idx.size < k:
            warnings.warn(f"cell {c} has {idx.size} rows < k={k}; distributing best-effort",
                          RuntimeWarning)
        if idx.size == 0:
            continue
        perm = rng.permutation(idx)
        base, extra = divmod(idx.size, k)
        sizes = [base + (1 if (f - offset) % k < extra else 0) for f in range(k)]
        pos = 0
        for f in range(k):
            folds[f].extend(perm[pos:pos + sizes[f]])
            pos += sizes[f]
        offset = (offset + extra) % k
    out = []
    for f in range(k):
        test = np.sort(np.array(folds[f], dtype=int))
        train = np.sort(np.concatenate([np.array(folds[g], dtype=int) for g in range(k) if g != f]))
        out.append((train, test))
    return out


def kfold_split(ds: Dataset, k: int, seed: int):
    return stratified_kfold_indices(ds.y, ds.s, k, seed)
