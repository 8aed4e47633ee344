"""Wasserstein distributionally robust logistic regression, with and without
the fairness penalty, as exponential-cone programs.

Both builders dualize the worst case over a Wasserstein ball around the
empirical distribution, with ground cost

    ||x - x'||_2 + kappa_s |s - s'| + kappa_y |y - y'|,

giving one epigraph row per (sample, transport destination) pair.  The
fairness-penalized variant additionally restricts the ball to distributions
whose (s, y) cell probabilities match the empirical ones; the cell
multipliers mu price that restriction.

A trailing constant-1 intercept column is expected in X; the intercept weight
is excluded from every norm constraint, since feature transport cannot move
the constant coordinate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .conic import ConicProgram, LinExpr, Tolerances, solve
from .dataset import MarginalTable, marginals_from_arrays
from .errors import ConfigError
from .nominal import FittedModel

INF = math.inf


@dataclass
class HyperParams:
    """Knobs of the robust/fair families.

    kappa_y = inf is an exact sentinel meaning labels cannot be transported
    (the flip constraints are dropped rather than approximated by a large
    cost). eta must not exceed eta_max of the training marginals or the
    reformulation loses convexity; that is validated at fit time.
    """
    rho: float = 0.0
    kappa_s: float = 0.0
    kappa_y: float = INF
    eta: float = 0.0
    lam: float = 0.0
    marginals: MarginalTable | None = None
    halve_kappa_y: bool = False   # appendix ground-metric convention: kappa_y/2

    def __post_init__(self):
        for name in ("rho", "kappa_s", "kappa_y", "eta", "lam"):
            v = float(getattr(self, name))
            if math.isnan(v) or v < 0:
                raise ConfigError(f"{name} must be nonnegative, got {v}")

    def effective_kappa_y(self) -> float:
        return self.kappa_y / 2.0 if self.halve_kappa_y else self.kappa_y


@dataclass
class DroDiagnostics:
    status: str
    objective: float
    psi: float
    solve_time: float
    iterations: int
    rel_gap: float
    max_violation: float
    extras: dict = field(default_factory=dict)


def eta_max(marg: MarginalTable) -> float:
    """Largest admissible fairness weight: min of the defaulter cells
    p(s=0,y=1), p(s=1,y=1)."""
    return float(min(marg.p[0, 1], marg.p[1, 1]))


def _margins(p: ConicProgram, X):
    """Auxiliary variables zeta = X w with equality rows; keeps every
    epigraph row one-sparse in the margins instead of m-dense in w."""
    n, m = X.shape
    w = p.add_vars("w", m)
    zeta = p.add_vars("zeta", n)
    for i in range(n):
        p.add_eq(LinExpr(np.append(w, zeta[i]), np.append(X[i], -1.0)))
    return w, zeta


def build_drlr(X, y, rho, kappa_y, halve_kappa_y=False) -> ConicProgram:
    """Label-transport DRO logistic regression:

        min  rho*psi + (1/n) sum_i d_i
        s.t. loss(x_i, y_i) <= d_i
             loss(x_i, 1 - y_i) - psi*kappa_y <= d_i   (dropped at kappa_y=inf)
             ||w_features|| <= psi,  psi >= 0.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if rho < 0:
        raise ConfigError("rho must be nonnegative")
    if not (kappa_y > 0):
        raise ConfigError("kappa_y must be positive (inf drops the flip constraints)")
    n = X.shape[0]
    ky = (kappa_y / 2.0 if halve_kappa_y else kappa_y)

    p = ConicProgram()
    w, zeta = _margins(p, X)
    d = p.add_vars("d", n)
    # At rho = 0 the ball degenerates to the empirical distribution (any label
    # flip costs kappa_y > 0 against a zero budget), so the transport block
    # (psi, flip rows, norm cone) is vacuous; building it anyway leaves an
    # unbounded optimal face along psi that stalls the interior-point backend.
    if rho == 0.0:
        p.set_objective(LinExpr(d, np.full(n, 1.0 / n)))
        for i in range(n):
            p.add_softplus_epigraph(LinExpr.of(zeta[i], 1.0 - 2.0 * y[i]),
                                    LinExpr.of(d[i]))
        return p

    psi = p.add_vars("psi", 1)[0]
    p.add_nonneg(LinExpr.of(psi))
    p.set_objective(LinExpr(np.append(d, psi), np.append(np.full(n, 1.0 / n), rho)))
    for i in range(n):
        sign = 1.0 - 2.0 * y[i]
        p.add_softplus_epigraph(LinExpr.of(zeta[i], sign), LinExpr.of(d[i]))
        if not math.isinf(ky):
            flip_bound = LinExpr([d[i], psi], [1.0, ky])
            p.add_softplus_epigraph(LinExpr.of(zeta[i], -sign), flip_bound)
    p.add_norm_epigraph([LinExpr.of(j) for j in w[:-1]], LinExpr.of(psi))
    return p


def _fairness_coefficients(eta, marg: MarginalTable):
    """Per sign row a and branch group sigma, the y=1 loss coefficient.

    Row a = 0 linearizes the + branch of |E[ln h | 1,1] - E[ln h | 0,1]|:
    non-protected defaulters are up-weighted by eta/p01 and protected ones
    down-weighted by eta/p11; row a = 1 is the mirror image. The printed
    reformulation shows only the (1 - eta/p_s1) halves; the (1 + eta/p)
    factors are forced by its own norm constraints, which are exactly the
    max-over-branches Lipschitz bounds.
    """
    if eta == 0:
        coef = {(a, sig): 1.0 for a in (0, 1) for sig in (0, 1)}
        return coef, {0: 1.0, 1: 1.0}
    r01 = eta / marg.p[0, 1]
    r11 = eta / marg.p[1, 1]
    coef = {
        (0, 0): 1.0 + r01, (0, 1): 1.0 - r11,
        (1, 0): 1.0 - r01, (1, 1): 1.0 + r11,
    }
    scales = {0: 1.0 + r01, 1: 1.0 + r11}
    return coef, scales


def build_drflr(X, y, s, hp: HyperParams) -> ConicProgram:
    """Marginal-preserving DRO with the log-equalized-opportunities penalty:

        min  t
        s.t. rho*psi_a + (1/n) sum_i d[a,i] + sum_{sig,ups} p_hat[sig,ups] mu[a,sig,ups] <= t
             branch epigraphs for every transport destination (sig, ups):
               coef * softplus(-/+ w.x_i) - psi_a*(kappa_s|sig-s_i| + kappa_y|ups-y_i|)
                 - mu[a,sig,ups] <= d[a,i]
             ||w_features|| (1 + eta/p01) <= psi_0,  ||w_features|| (1 + eta/p11) <= psi_1

    for both sign rows a of the absolute-value penalty.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    s = np.asarray(s, dtype=int)
    marg = hp.marginals or marginals_from_arrays(y, s)
    bound = eta_max(marg)
    if hp.eta > bound + 1e-15:
        raise ConfigError(f"eta={hp.eta} exceeds eta_max={bound} "
                          f"(min of the defaulter cells); the program would be nonconvex")
    if hp.eta > 0 and (marg.p[0, 1] == 0 or marg.p[1, 1] == 0):
        raise ConfigError("eta > 0 requires both defaulter cells nonempty")
    n = X.shape[0]
    ks = hp.kappa_s
    ky = hp.effective_kappa_y()
    coef, scales = _fairness_coefficients(hp.eta, marg)

    p = ConicProgram()
    w, zeta = _margins(p, X)
    t = p.add_vars("t", 1)[0]
    d = p.add_vars("d", 2 * n).reshape(2, n)
    # Every branch bounds one of just two per-sample loss kernels, so those
    # get shared epigraph variables (e0 >= softplus(+w.x), e1 >= softplus(-w.x))
    # and the branch constraints themselves stay linear.
    e0 = p.add_vars("e0", n)
    e1 = p.add_vars("e1", n)
    for i in range(n):
        p.add_softplus_epigraph(LinExpr.of(zeta[i], 1.0), LinExpr.of(e0[i]))
        p.add_softplus_epigraph(LinExpr.of(zeta[i], -1.0), LinExpr.of(e1[i]))
    p.set_objective(LinExpr.of(t))

    if hp.rho == 0.0:
        # Zero radius: the marginal equalities forbid (s, y) moves outright
        # and any feature move has positive cost, so the ball is exactly the
        # empirical distribution. Only the matched branch survives per row and
        # the cell multipliers cancel; building the transport block anyway
        # leaves unbounded optimal faces that stall the interior-point backend.
        for a in (0, 1):
            row = LinExpr(np.append(d[a], t), np.append(np.full(n, -1.0 / n), 1.0))
            p.add_nonneg(row)
            for i in range(n):
                loss = (e0[i], 1.0) if y[i] == 0 else (e1[i], coef[(a, s[i])])
                p.add_nonneg(LinExpr([d[a, i], loss[0]], [1.0, -loss[1]]))
        return p

    psi = p.add_vars("psi", 2)
    mu = p.add_vars("mu", 8).reshape(2, 2, 2)
    for a in (0, 1):
        p.add_nonneg(LinExpr.of(psi[a]))

    # Transport destinations with zero empirical mass are forbidden by the
    # marginal equalities (their multiplier would run to infinity), so those
    # branches and multipliers are dropped. Shifting a row's remaining
    # multipliers uniformly while lowering its d block is feasibility- and
    # objective-neutral; pinning one multiplier per row removes that null
    # direction, which otherwise stalls the interior-point backend.
    present = [(sig, ups) for sig in (0, 1) for ups in (0, 1) if marg.p[sig, ups] > 0]
    for a in (0, 1):
        p.add_eq(LinExpr.of(mu[a, present[0][0], present[0][1]]))
        for sig in (0, 1):
            for ups in (0, 1):
                if (sig, ups) not in present:
                    p.add_eq(LinExpr.of(mu[a, sig, ups]))

    for a in (0, 1):
        idx = [t, psi[a]]
        val = [1.0, -hp.rho]
        idx.extend(d[a])
        val.extend(np.full(n, -1.0 / n))
        for sig in (0, 1):
            for ups in (0, 1):
                idx.append(mu[a, sig, ups])
                val.append(-float(marg.p[sig, ups]))
        p.add_nonneg(LinExpr(idx, val))  # t - rho*psi_a - (1/n)sum d - sum p*mu >= 0

        p.add_norm_epigraph([LinExpr.of(j) for j in w[:-1]], LinExpr.of(psi[a]),
                            scale=scales[a])

        for i in range(n):
            for sig, ups in present:
                if (sig != s[i] and math.isinf(ks)) or (ups != y[i] and math.isinf(ky)):
                    continue
                offset = ks * abs(sig - s[i]) + ky * abs(ups - y[i])
                loss = (e0[i], 1.0) if ups == 0 else (e1[i], coef[(a, sig)])
                p.add_nonneg(LinExpr(
                    [d[a, i], psi[a], mu[a, sig, ups], loss[0]],
                    [1.0, offset, 1.0, -loss[1]]))
    return p


def _diagnostics(sol, psi_value, extras=None) -> DroDiagnostics:
    cert = sol.certificate
    return DroDiagnostics(
        status=sol.status, objective=sol.objective, psi=psi_value,
        solve_time=sol.solve_time, iterations=sol.iterations,
        rel_gap=cert.rel_gap if cert else float("nan"),
        max_violation=max(cert.primal_violation, cert.dual_violation) if cert else float("nan"),
        extras=extras or {})


def fit_drlr(X, y, hp: HyperParams, tol: Tolerances | None = None):
    """Solve the DRLR program; returns the weight vector and diagnostics."""
    y = np.asarray(y, dtype=int)
    if y.min() == y.max():
        raise ValueError("fit_drlr needs both classes present")
    program = build_drlr(X, y, hp.rho, hp.kappa_y, hp.halve_kappa_y)
    sol = solve(program, tol).require_optimal()
    w = sol.x[program.var_blocks["w"]]
    if "psi" in program.var_blocks:
        psi = float(sol.x[program.var_blocks["psi"][0]])
    else:
        psi = float(np.linalg.norm(w[:-1]))  # rho=0 program carries no psi
    model = FittedModel("DRLR", w, hyperparams={"rho": hp.rho, "kappa_y": hp.kappa_y})
    return model, _diagnostics(sol, psi)


def fit_drflr(X, y, s, hp: HyperParams, tol: Tolerances | None = None, family="DRFLR"):
    """Solve the DRFLR program; returns the weight vector and diagnostics."""
    y = np.asarray(y, dtype=int)
    if y.min() == y.max():
        raise ValueError("fit_drflr needs both classes present")
    program = build_drflr(X, y, s, hp)
    sol = solve(program, tol).require_optimal()
    w = sol.x[program.var_blocks["w"]]
    if "psi" in program.var_blocks:
        psi = sol.x[program.var_blocks["psi"]]
        mu = sol.x[program.var_blocks["mu"]].reshape(2, 2, 2).tolist()
    else:
        # rho=0 specialization: psi sits at its norm floor, mu cancels to zero
        marg = hp.marginals or marginals_from_arrays(y, s)
        _, scales = _fairness_coefficients(hp.eta, marg)
        wn = float(np.linalg.norm(w[:-1]))
        psi = np.array([scales[0] * wn, scales[1] * wn])
        mu = np.zeros((2, 2, 2)).tolist()
    extras = {
        "t": float(sol.x[program.var_blocks["t"][0]]),
        "psi0": float(psi[0]), "psi1": float(psi[1]),
        "mu": mu,
    }
    model = FittedModel(family, w, hyperparams={
        "rho": hp.rho, "kappa_s": hp.kappa_s, "kappa_y": hp.kappa_y, "eta": hp.eta})
    return model, _diagnostics(sol, float(psi.min()), extras)


def fit_flr(X, y, s, eta, tol: Tolerances | None = None, marginals=None):
    """Fairness-penalized logistic regression: the rho = 0 conic path.

    The raw penalty (absolute difference of concave conditional expectations)
    is not convex; the dual with coefficients 1 -+ eta/p_s1 >= 0 is its convex
    realization, which is where the eta <= eta_max bound comes from.
    """
    hp = HyperParams(rho=0.0, kappa_s=1.0, kappa_y=1.0, eta=eta, marginals=marginals)
    return fit_drflr(X, y, s, hp, tol, family="FLR")
