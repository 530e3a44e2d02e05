"""Eigensolver paths for the assembled Helmholtz problem."""
from __future__ import annotations

from ..assembly import ProblemKind
from ..errors import InvalidArgument
from .iterative import solve_nonlinear_iterative
from .linear import solve_linear
from .matrix_free import solve_with_matrix_free
from .modes import Mode, ModeSet, Stability, classify_stability
from .nleigs import solve_nonlinear_nleigs
from .problem import SplitProblem, residual
from .toar import solve_quadratic

METHODS = ("auto", "linear", "quadratic", "nleigs", "iterative", "matrix-free")


def default_method(kind: ProblemKind) -> str:
    return {ProblemKind.LINEAR: "linear", ProblemKind.QUADRATIC: "quadratic",
            ProblemKind.NONLINEAR: "nleigs"}[ProblemKind(kind)]


def solve(problem, config, method: str = "auto", seed=None) -> ModeSet:
    """Dispatch ``problem`` (assembled or split) to one solution path.

    ``auto`` picks by problem class. ``matrix-free`` runs the ``auto`` path
    with GMRES inner solves on the second-order operator.
    """
    if method not in METHODS:
        raise InvalidArgument(f"unknown solver {method!r}; choose from {', '.join(METHODS)}")
    if method == "matrix-free":
        assembled = problem.assembled if isinstance(problem, SplitProblem) else problem
        return solve_with_matrix_free(assembled, config, seed=seed)
    sp = problem if isinstance(problem, SplitProblem) else SplitProblem(problem)
    kind = sp.assembled.kind
    if method == "auto":
        method = default_method(kind)
    if method == "linear":
        if kind is not ProblemKind.LINEAR:
            raise InvalidArgument(f"linear solver cannot handle a {kind.value} problem")
        return solve_linear(sp, config, seed=seed)
    if method == "quadratic":
        if kind is ProblemKind.NONLINEAR:
            raise InvalidArgument("quadratic solver cannot handle a Nonlinear problem")
        return solve_quadratic(sp, config, seed=seed)
    if method == "nleigs":
        return solve_nonlinear_nleigs(sp, config, seed=seed)
    return solve_nonlinear_iterative(sp, config, seed=seed)


__all__ = ["Mode", "ModeSet", "Stability", "classify_stability", "solve", "solve_linear",
           "solve_quadratic", "solve_nonlinear_nleigs", "solve_nonlinear_iterative",
           "solve_with_matrix_free", "residual", "SplitProblem", "METHODS", "default_method"]
