"""
Eigensolves against the matrix-free second-order operator.

Every inner solve with ``alpha A2 + beta B + gamma C - delta s g^T`` runs
GMRES on the matrix-free combination, preconditioned by the LU of the same
combination built from the explicit first-order ``A``. For the nonlinear path
the preconditioner therefore includes the source term at the shift.
"""
from __future__ import annotations

from ..assembly import AssembledProblem
from ..case import SolverConfig
from .problem import SplitProblem


def matrix_free_split(assembled: AssembledProblem, inner_tol: float = 1e-10,
                      inner_max_iter: int = 200) -> SplitProblem:
    if assembled.A2 is None:
        raise ValueError("assembled problem carries no matrix-free operator; assemble with matrix_free=True")
    return SplitProblem(assembled, matrix_free=True, inner_tol=inner_tol,
                        inner_max_iter=inner_max_iter)


def solve_with_matrix_free(assembled: AssembledProblem, config: SolverConfig, method: str = "auto",
                           seed=None, inner_tol: float = 1e-10):
    """Solve with the chosen path; residuals are measured with the matrix-free ``F``.

    GMRES failures propagate as :class:`~resonare.errors.NoConvergenceError`
    carrying the iteration history.
    """
    from . import solve

    sp = matrix_free_split(assembled, inner_tol=inner_tol)
    out = solve(sp, config, method=method, seed=seed)
    out.diagnostics["matrix_free"] = True
    out.diagnostics["max_gmres_iterations"] = sp.stats.max_gmres_iterations
    return out
