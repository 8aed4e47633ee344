"""Independent certificate verifier for conic solutions.

Recomputes every residual from the compiled standard form with plain numpy;
deliberately shares no code with the solve path. For

    min q'x  s.t.  A x + s = b,  s in K

a primal-dual pair (x, z) is optimal when  s = b - A x  lies in K, the dual
residual A'z + q vanishes, z lies in the dual cone K*, and the objectives
q'x and -b'z agree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_E = math.e


def _exp_primal_violation(a, b, c) -> float:
    viol = max(0.0, -b)
    if b <= 1e-300:
        return max(viol, a, -c, 0.0)
    t = a / b
    if t > 700.0:
        return math.inf
    return max(viol, b * math.exp(t) - c)


def _exp_dual_violation(u, v, w) -> float:
    # K_exp* = closure{ (u,v,w) : u < 0, -u * exp(v/u) <= e * w }
    viol = max(0.0, u)
    if u >= -1e-300:
        return max(viol, -v, -w, 0.0)
    t = v / u
    if t > 700.0:
        return math.inf
    return max(viol, -u * math.exp(t) - _E * w)


def _cone_violation(vals, kind, dual: bool) -> float:
    if kind == "zero":
        # dual of the zero cone is the free cone
        return 0.0 if dual else float(np.abs(vals).max(initial=0.0))
    if kind == "nonneg":
        return float(np.maximum(-vals, 0.0).max(initial=0.0))
    if kind == "soc":
        return max(0.0, float(np.linalg.norm(vals[1:]) - vals[0]))
    if kind == "exp":
        f = _exp_dual_violation if dual else _exp_primal_violation
        return f(vals[0], vals[1], vals[2])
    raise ValueError(f"unknown cone kind {kind!r}")


def _blockwise_max(vec, layout, dual) -> float:
    worst = 0.0
    pos = 0
    for kind, size in layout:
        worst = max(worst, _cone_violation(vec[pos:pos + size], kind, dual))
        pos += size
    return worst


@dataclass
class Certificate:
    primal_violation: float      # worst cone violation of b - A x
    dual_violation: float        # worst dual-cone violation of z
    dual_residual: float         # ||A'z + q||_inf
    rel_gap: float               # |q'x + b'z| / max(1, |q'x|, |b'z|)
    primal_objective: float
    dual_objective: float

    def ok(self, feas_tol: float, gap_tol: float) -> bool:
        return (self.primal_violation <= feas_tol
                and self.dual_violation <= feas_tol
                and self.dual_residual <= feas_tol
                and self.rel_gap <= gap_tol)


def verify_solution(q, A, b, layout, x, z) -> Certificate:
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    s = b - A @ x
    p_obj = float(q @ x)
    d_obj = float(-(b @ z))
    return Certificate(
        primal_violation=_blockwise_max(s, layout, dual=False),
        dual_violation=_blockwise_max(z, layout, dual=True),
        dual_residual=float(np.abs(A.T @ z + q).max(initial=0.0)),
        rel_gap=abs(p_obj - d_obj) / max(1.0, abs(p_obj), abs(d_obj)),
        primal_objective=p_obj,
        dual_objective=d_obj,
    )


def verify_infeasibility_ray(A, b, layout, z, tol=1e-7) -> bool:
    """Farkas certificate: z in K*, A'z ~ 0 and b'z < 0 (scaled)."""
    z = np.asarray(z, dtype=float)
    scale = float(np.abs(z).max(initial=0.0))
    if scale <= 0 or not math.isfinite(scale):
        return False
    z = z / scale
    bz = float(b @ z)
    return (_blockwise_max(z, layout, dual=True) <= tol
            and float(np.abs(A.T @ z).max(initial=0.0)) <= tol
            and bz < -tol)


def verify_unboundedness_ray(q, A, layout, x, tol=1e-7) -> bool:
    """Improving primal ray: -A x in K and q'x < 0 (scaled)."""
    x = np.asarray(x, dtype=float)
    scale = float(np.abs(x).max(initial=0.0))
    if scale <= 0 or not math.isfinite(scale):
        return False
    x = x / scale
    return (_blockwise_max(-(A @ x), layout, dual=False) <= tol
            and float(q @ x) < -tol)
