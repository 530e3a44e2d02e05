"""
Split-form access to ``F(w) = A + w B + w^2 C - sum_i eta_i e^{i w tau_i} s g^T``.

Every inner solve any eigensolver needs is with a combination
``alpha A + beta B + gamma C - delta s g^T``. :class:`SplitProblem` builds
solvers for such combinations: a direct LU when ``A`` is explicit, or GMRES on
the matrix-free second-order operator preconditioned by the LU of the same
combination built from the explicit first-order matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..assembly import AssembledProblem, Rank1Source
from ..linalg import as_complex_csr, gmres, is_empty, lu_factor


@dataclass
class SolveStats:
    factorizations: int = 0
    solves: int = 0
    gmres_iterations: list = field(default_factory=list)

    @property
    def max_gmres_iterations(self) -> int:
        return max(self.gmres_iterations, default=0)


class CombinationSolver:
    """Solves with ``alpha A + beta B + gamma C - delta s g^T``."""

    def __init__(self, problem: "SplitProblem", alpha, beta, gamma, delta):
        self.problem = problem
        self.coef = (complex(alpha), complex(beta), complex(gamma), complex(delta))
        self.matrix = problem.combination(*self.coef)
        self.factor = lu_factor(self.matrix, problem.lu_method)
        problem.stats.factorizations += 1

    def apply(self, v):
        return self.problem.apply_combination(*self.coef, v)

    def solve(self, b):
        p = self.problem
        p.stats.solves += 1
        if not p.matrix_free:
            return self.factor.solve(b)
        res = gmres(self.apply, b, self.factor, tol=p.inner_tol, max_iter=p.inner_max_iter,
                    restart=p.inner_restart)
        p.stats.gmres_iterations.append(res.iterations)
        return res.x


class SplitProblem:
    """Operator access shared by all eigensolver paths.

    Parameters
    ----------
    assembled : AssembledProblem
    matrix_free : bool
        Use ``assembled.A2`` as the true ``A`` and the explicit ``A`` only for
        preconditioning.
    inner_tol : float
        Relative GMRES tolerance for matrix-free inner solves.
    """

    def __init__(self, assembled: AssembledProblem, matrix_free: bool = False,
                 inner_tol: float = 1e-10, inner_max_iter: int = 200, inner_restart: int = 50,
                 lu_method: str = "auto"):
        if matrix_free and assembled.A2 is None:
            raise ValueError("matrix-free solve requested but the problem has no second-order operator")
        self.assembled = assembled
        self.A = assembled.A
        self.B = None if is_empty(assembled.B) else assembled.B
        self.C = assembled.C
        S = assembled.S
        self.S: Rank1Source | None = None if (S is None or S.is_empty) else S
        self.matrix_free = matrix_free
        self.A2 = assembled.A2 if matrix_free else None
        self.inner_tol = inner_tol
        self.inner_max_iter = inner_max_iter
        self.inner_restart = inner_restart
        self.lu_method = lu_method
        self.stats = SolveStats()
        self._S_matrix = None

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def norms(self) -> dict:
        return self.assembled.norms

    @property
    def source_matrix(self) -> sp.csr_matrix:
        if self._S_matrix is None and self.S is not None:
            self._S_matrix = self.S.matrix()
        return self._S_matrix

    # combinations -----------------------------------------------------------

    def combination(self, alpha, beta, gamma, delta) -> sp.csr_matrix:
        """Explicit ``alpha A + beta B + gamma C - delta s g^T`` (first-order A)."""
        M = alpha * self.A + gamma * self.C
        if self.B is not None and beta != 0:
            M = M + beta * self.B
        if self.S is not None and delta != 0:
            M = M - delta * self.source_matrix
        return as_complex_csr(M)

    def apply_A(self, v):
        return self.A2.apply(v) if self.matrix_free else self.A @ v

    def apply_combination(self, alpha, beta, gamma, delta, v):
        out = alpha * self.apply_A(v) + gamma * (self.C @ v)
        if self.B is not None and beta != 0:
            out = out + beta * (self.B @ v)
        if self.S is not None and delta != 0:
            out = out - delta * self.S.g_dot(v) * self.S.s
        return out

    def solver(self, alpha, beta, gamma, delta=0.0) -> CombinationSolver:
        return CombinationSolver(self, alpha, beta, gamma, delta)

    # F(w) -------------------------------------------------------------------

    def source_coefficient(self, omega) -> complex:
        return 0.0 if self.S is None else self.S.coefficient(omega)

    def apply_F(self, omega, v):
        return self.apply_combination(1.0, omega, omega * omega, self.source_coefficient(omega), v)

    def apply_dF(self, omega, v):
        out = 2 * omega * (self.C @ v)
        if self.B is not None:
            out = out + self.B @ v
        if self.S is not None:
            out = out - self.S.dcoefficient(omega) * self.S.g_dot(v) * self.S.s
        return out

    def F_matrix(self, omega) -> sp.csr_matrix:
        """Explicit ``F(w)``; with ``matrix_free`` the second-order ``A`` is materialized."""
        M = self.combination(1.0, omega, omega * omega, self.source_coefficient(omega))
        if self.matrix_free:
            M = as_complex_csr(M - self.A + self.A2.as_matrix())
        return M

    def scale(self, omega) -> float:
        n = self.norms
        s = n["A"] + abs(omega) * n["B"] + abs(omega) ** 2 * n["C"]
        if self.S is not None:
            s += sum(abs(e * np.exp(1j * omega * t)) for e, t in self.S.terms) * n["S"]
        return s

    def residual(self, omega, p) -> float:
        """``|F(w) p| / ((|A|_F + |w||B|_F + |w|^2|C|_F + sum|eta_i e^{i w tau_i}||s g^T|_F) |p|)``."""
        p = np.asarray(p)
        return float(np.linalg.norm(self.apply_F(omega, p)) / (self.scale(omega) * np.linalg.norm(p)))


def residual(problem: SplitProblem, omega, p) -> float:
    return problem.residual(omega, p)


def start_vector(n: int, seed=None) -> np.ndarray:
    """Normalized all-ones vector, or a seeded random complex vector."""
    if seed is None:
        v = np.ones(n, dtype=complex)
    else:
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


TWO_PI = 2.0 * math.pi
