"""Shift-and-invert Krylov-Schur for the linear problem ``(A + w^2 C) P = 0``."""
from __future__ import annotations

import math
import time

import numpy as np

from ..case import SolverConfig
from ..errors import NoConvergenceError
from .krylov import ArnoldiBasis, krylov_schur
from .modes import Mode, ModeSet, normalize_shape, principal_sqrt
from .problem import SplitProblem, start_vector

ORIGIN_SHIFT = -(2 * math.pi * 5.0) ** 2


def as_split(problem) -> SplitProblem:
    return problem if isinstance(problem, SplitProblem) else SplitProblem(problem)


def squared_shift(sigma: complex) -> complex:
    """Shift in ``w^2``; a zero target moves to ``-(2 pi 5)^2`` because the
    all-Reflecting ``A`` is singular."""
    return sigma * sigma if sigma != 0 else complex(ORIGIN_SHIFT)


def solve_linear(problem, config: SolverConfig, seed=None, v0=None) -> ModeSet:
    """``nev`` modes nearest ``config.target`` of ``A P = -w^2 C P``.

    Arnoldi runs on ``(A + sigma2 C)^{-1} C`` whose dominant eigenvalues
    ``theta`` map back through ``w^2 = sigma2 - 1/theta``. Two extra values are
    computed internally so the constant-pressure mode can be discarded.
    """
    t0 = time.perf_counter()
    sp = as_split(problem)
    sigma = config.target
    sig2 = squared_shift(sigma)
    solver = sp.solver(1.0, 0.0, sig2, 0.0)

    def op(v):
        return solver.solve(sp.C @ v)

    nev_int = config.nev + 2
    ncv = max(config.ncv, 2 * nev_int)
    v = v0 if v0 is not None else start_vector(sp.n, seed)
    basis = ArnoldiBasis(op, v, ncv, seed=seed or 0)
    res = krylov_schur(basis, nev_int, ncv, config.tol, config.restart_fraction, config.max_restarts)

    X = basis.vectors(res.coords)
    modes = []
    for i, theta in enumerate(res.values):
        omega = principal_sqrt(sig2 - 1.0 / theta)
        if abs(omega) < config.omega_min:
            continue
        x = X[:, i]
        modes.append(Mode(omega, normalize_shape(x), sp.residual(omega, x)))
    modes.sort(key=lambda m: abs(m.omega - sigma))
    modes = modes[:config.nev]
    diag = {"path": "linear", "iterations": res.iterations, "restarts": res.restarts,
            "factorizations": sp.stats.factorizations, "orthogonality": res.orthogonality,
            "gmres_iterations": list(sp.stats.gmres_iterations),
            "wall_time": time.perf_counter() - t0}
    out = ModeSet(modes, sigma, diag)
    bad = [m for m in modes if not m.residual <= config.tol]
    if not res.converged or len(modes) < config.nev or bad:
        raise NoConvergenceError(
            f"linear solve converged {len(modes) - len(bad)} of {config.nev} modes", partial=out)
    return out
