"""Smooth convex training of the nominal classifiers (LR, LRL2).

The shared prediction / log-loss kernels here are also reused by the conic
oracles in the test-suite. Training is deterministic: zero initialization,
full-batch L-BFGS with Armijo backtracking, no randomness anywhere.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

SCORE_EPS = 1e-12

FAMILIES = ("LR", "LRL2", "FLR", "DRLR", "DRFLR")


@dataclass
class OptimizerOptions:
    grad_tol: float = 1e-8
    max_iter: int = 10000
    # Armijo backtracking parameters (sufficient decrease)
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    history: int = 10

    def __post_init__(self):
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")


@dataclass
class FittedModel:
    """A trained weight vector plus the provenance needed to reproduce it.

    ``weights`` includes the intercept weight as its last entry, matching the
    trailing constant-1 column of the design matrix.
    """
    family: str
    weights: np.ndarray
    feature_names: list = field(default_factory=list)
    hyperparams: dict = field(default_factory=dict)
    standardization_params: dict = field(default_factory=dict)
    seed: int | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        self.weights = np.asarray(self.weights, dtype=float)
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("non-finite weights")

    def predict_proba(self, X):
        return predict_proba(self.weights, X)

    def to_json(self) -> str:
        doc = {
            "family": self.family,
            "feature_names": list(self.feature_names),
            "weights": [float(v) for v in self.weights],
            "hyperparams": self.hyperparams,
            "standardization_params": self.standardization_params,
            "seed": self.seed,
            "provenance": self.provenance,
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FittedModel":
        doc = json.loads(text)
        return cls(
            family=doc["family"],
            weights=np.array(doc["weights"], dtype=float),
            feature_names=doc.get("feature_names", []),
            hyperparams=doc.get("hyperparams", {}),
            standardization_params=doc.get("standardization_params", {}),
            seed=doc.get("seed"),
            provenance=doc.get("provenance", {}),
        )


def predict_proba(w, X):
    """Sigmoid scores sigma(X @ w), clamped to [1e-12, 1 - 1e-12]."""
    w = np.asarray(w, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.shape[1] != w.shape[0]:
        raise ValueError(f"dimension mismatch: X has {X.shape[1]} columns, w has {w.shape[0]}")
    return np.clip(expit(X @ w), SCORE_EPS, 1.0 - SCORE_EPS)


def _softplus(v):
    return np.logaddexp(0.0, v)


def logloss(w, X, y):
    """Mean cross-entropy and its gradient (1/n) X^T (sigma(Xw) - y).

    Computed from the margins directly (log-sum-exp), so the value and the
    gradient stay consistent for finite-difference checks even at extreme
    margins; the [1e-12] clamp applies only to emitted probability scores.
    """
    w = np.asarray(w, dtype=float)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    z = X @ w
    sign = 1.0 - 2.0 * y  # +1 for y=0, -1 for y=1
    loss = float(np.mean(_softplus(sign * z)))
    grad = X.T @ (expit(z) - y) / X.shape[0]
    return loss, grad


def lbfgs_minimize(fun, w0, opts: OptimizerOptions | None = None):
    """Deterministic L-BFGS with Armijo backtracking.

    ``fun(w) -> (value, gradient)``. Returns ``(w, info)`` where info records
    the accepted objective values (monotone non-increasing by construction),
    iteration count and whether the gradient tolerance was met.
    """
    opts = opts or OptimizerOptions()
    w = np.asarray(w0, dtype=float).copy()
    f, g = fun(w)
    s_hist, y_hist, rho_hist = [], [], []
    objs = [f]
    converged = bool(np.linalg.norm(g, np.inf) <= opts.grad_tol)
    it = 0
    while not converged and it < opts.max_iter:
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s_k, y_k, rho_k in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
            a_k = rho_k * (s_k @ q)
            alphas.append(a_k)
            q -= a_k * y_k
        if y_hist:
            gamma = (s_hist[-1] @ y_hist[-1]) / (y_hist[-1] @ y_hist[-1])
            q *= gamma
        for (s_k, y_k, rho_k), a_k in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
            b_k = rho_k * (y_k @ q)
            q += (a_k - b_k) * s_k
        direction = -q
        slope = g @ direction
        if slope >= 0:  # safeguard: reset to steepest descent
            direction = -g
            slope = -(g @ g)
            s_hist, y_hist, rho_hist = [], [], []
        step = 1.0
        f_new, g_new, w_new = f, g, w
        accepted = False
        while step > 1e-20:
            w_new = w + step * direction
            f_new, g_new = fun(w_new)
            if np.isfinite(f_new) and f_new <= f + opts.armijo_c * step * slope:
                accepted = True
                break
            step *= opts.backtrack
        if not accepted:
            break  # no further progress possible at this scale
        s_k = w_new - w
        y_k = g_new - g
        sy = s_k @ y_k
        if sy > 1e-12 * (np.linalg.norm(s_k) * np.linalg.norm(y_k) + 1e-300):
            s_hist.append(s_k)
            y_hist.append(y_k)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > opts.history:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
        w, f, g = w_new, f_new, g_new
        objs.append(f)
        it += 1
        converged = bool(np.linalg.norm(g, np.inf) <= opts.grad_tol)
    info = {"iterations": it, "converged": converged, "objective": f,
            "grad_inf_norm": float(np.linalg.norm(g, np.inf)), "objective_history": objs}
    return w, info


def fit_lr(X, y, opts: OptimizerOptions | None = None) -> FittedModel:
    """Plain ERM logistic regression; warns when the iteration cap is hit
    (separable data drives the weights unboundedly)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.min() == y.max():
        raise ValueError("fit_lr needs both classes present")
    w, info = lbfgs_minimize(lambda w: logloss(w, X, y), np.zeros(X.shape[1]), opts)
    if not info["converged"]:
        warnings.warn(
            f"fit_lr stopped at max_iter with grad inf-norm {info['grad_inf_norm']:.2e} "
            "(separable data?)", RuntimeWarning)
    return FittedModel("LR", w, provenance={"optimizer": info})


def fit_lrl2(X, y, lam, opts: OptimizerOptions | None = None) -> FittedModel:
    """L2-regularized logistic regression.

    The penalty lam * sum(w_j^2) runs over all weights except the intercept
    (last column).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    feat = np.ones(X.shape[1], dtype=bool)
    feat[-1] = False

    def objective(w):
        loss, grad = logloss(w, X, y)
        loss += lam * float(w[feat] @ w[feat])
        grad = grad.copy()
        grad[feat] += 2.0 * lam * w[feat]
        return loss, grad

    w, info = lbfgs_minimize(objective, np.zeros(X.shape[1]), opts)
    if not info["converged"]:
        warnings.warn("fit_lrl2 stopped at max_iter", RuntimeWarning)
    return FittedModel("LRL2", w, hyperparams={"lambda": lam}, provenance={"optimizer": info})


def check_gradient(fun, w0, step=1e-5) -> float:
    """Max relative error between the analytic gradient and central differences."""
    w0 = np.asarray(w0, dtype=float)
    _, g = fun(w0)
    fd = np.empty_like(w0)
    for j in range(w0.size):
        e = np.zeros_like(w0)
        e[j] = step
        f_plus, _ = fun(w0 + e)
        f_minus, _ = fun(w0 - e)
        fd[j] = (f_plus - f_minus) / (2.0 * step)
    denom = max(1.0, float(np.linalg.norm(g, np.inf)))
    return float(np.linalg.norm(g - fd, np.inf) / denom)
