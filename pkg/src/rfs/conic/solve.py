"""Solve contract over the conic-program representation.

The backend is the Clarabel interior-point engine; every solution it labels
optimal must additionally pass the independent certificate verifier at the
requested tolerances, otherwise the solve is downgraded and reported.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import clarabel
import numpy as np
import scipy.sparse as sp

from ..errors import SolverError
from .program import ConicProgram
from .verify import Certificate, verify_solution

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
MAXITER = "MaxIter"

_STATUS_MAP = {
    "Solved": OPTIMAL,
    "PrimalInfeasible": INFEASIBLE,
    "AlmostPrimalInfeasible": INFEASIBLE,
    "DualInfeasible": UNBOUNDED,
    "AlmostDualInfeasible": UNBOUNDED,
}


@dataclass
class Tolerances:
    gap_tol: float = 1e-7
    feas_tol: float = 1e-7


@dataclass
class ConicSolution:
    status: str
    x: np.ndarray
    z: np.ndarray
    objective: float
    certificate: Certificate | None
    solver_status: str
    iterations: int
    solve_time: float
    diagnostics: dict = field(default_factory=dict)

    def require_optimal(self):
        if self.status != OPTIMAL:
            raise SolverError(
                f"conic solve ended {self.status} (backend: {self.solver_status}); "
                f"diagnostics: {self.diagnostics}")
        return self


def _run_backend(q, A, b, layout, settings):
    cones = []
    for kind, size in layout:
        if kind == "zero":
            cones.append(clarabel.ZeroConeT(size))
        elif kind == "nonneg":
            cones.append(clarabel.NonnegativeConeT(size))
        elif kind == "soc":
            cones.append(clarabel.SecondOrderConeT(size))
        elif kind == "exp":
            cones.append(clarabel.ExponentialConeT())
        else:
            raise ValueError(f"unknown cone kind {kind!r}")
    P = sp.csc_matrix((q.size, q.size))
    solver = clarabel.DefaultSolver(P, q, A, b, cones, settings)
    return solver.solve()


def solve(program: ConicProgram, tol: Tolerances | None = None) -> ConicSolution:
    """Solve and certify. Optimal results carry a verified certificate;
    infeasible/unbounded results carry the backend's improving ray."""
    tol = tol or Tolerances()
    q, A, b, layout = program.compile()

    t0 = time.perf_counter()
    # The independent certificate, not the backend label, decides optimality:
    # a stalled iterate that verifies is still optimal. Stiff instances react
    # unpredictably to individual settings, so retries use a deterministic
    # ladder of diverse numerics and the best-certifying iterate wins.
    ladder = (
        {},
        {"max_step_fraction": 0.90, "static_regularization_constant": 1e-7},
        {"equilibrate_enable": False, "static_regularization_constant": 1e-9},
    )
    raw = None
    certificate = None
    certified = False
    best_score = math.inf
    for attempt, overrides in enumerate(ladder):
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.max_threads = 1  # run-to-run determinism
        margin = 10.0 if attempt == 0 else 100.0
        settings.tol_gap_abs = tol.gap_tol / margin
        settings.tol_gap_rel = tol.gap_tol / margin
        settings.tol_feas = tol.feas_tol / margin
        settings.max_iter = 400
        for key, value in overrides.items():
            setattr(settings, key, value)
        candidate = _run_backend(q, A, b, layout, settings)
        if str(candidate.status) in ("PrimalInfeasible", "DualInfeasible"):
            raw, certificate = candidate, None
            break
        cert = verify_solution(q, A, b, layout,
                               np.asarray(candidate.x, dtype=float),
                               np.asarray(candidate.z, dtype=float))
        score = max(cert.primal_violation, cert.dual_violation,
                    cert.dual_residual, cert.rel_gap)
        if score < best_score:
            best_score, raw, certificate = score, candidate, cert
        if cert.ok(tol.feas_tol, tol.gap_tol):
            certified = True
            break
    elapsed = time.perf_counter() - t0

    solver_status = str(raw.status)
    if certified:
        status = OPTIMAL
    else:
        status = _STATUS_MAP.get(solver_status, MAXITER)
        if status == OPTIMAL:  # backend said Solved but certification failed
            status = MAXITER
    x = np.asarray(raw.x, dtype=float)
    z = np.asarray(raw.z, dtype=float)
    diagnostics = {"r_prim": raw.r_prim, "r_dual": raw.r_dual,
                   "obj_val": raw.obj_val, "obj_val_dual": raw.obj_val_dual,
                   "attempts": attempt + 1}
    if not certified and certificate is not None:
        diagnostics["verifier"] = vars(certificate)
        certificate = None
    objective = float(q @ x) if x.size else float("nan")
    return ConicSolution(status=status, x=x, z=z, objective=objective,
                         certificate=certificate, solver_status=solver_status,
                         iterations=raw.iterations, solve_time=elapsed,
                         diagnostics=diagnostics)
