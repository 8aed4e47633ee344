from .program import ConicProgram, LinExpr, affine
from .solve import (MAXITER, INFEASIBLE, OPTIMAL, UNBOUNDED, ConicSolution,
                    Tolerances, solve)
from .verify import (Certificate, verify_infeasibility_ray, verify_solution,
                     verify_unboundedness_ray)

__all__ = [
    "ConicProgram", "LinExpr", "affine",
    "ConicSolution", "Tolerances", "solve",
    "OPTIMAL", "INFEASIBLE", "UNBOUNDED", "MAXITER",
    "Certificate", "verify_solution", "verify_infeasibility_ray",
    "verify_unboundedness_ray",
]
