"""
Fixed-point baseline for the nonlinear problem.

The flame source is first dropped and the cold quadratic problem is solved.
Each cold mode then seeds the iteration

    [(A - D(w_{k-1})) + w B + w^2 C] P = 0,

keeping the eigenvalue nearest ``w_{k-1}``, until two successive iterates are
within ``iter_tol``. Every step is a full quadratic solve with its own
factorization, which is what makes this path slow compared with NLEIGS.
"""
from __future__ import annotations

import math
import time

import numpy as np

from ..case import SolverConfig
from ..errors import NoConvergenceError
from .linear import as_split
from .modes import Mode, ModeSet
from .toar import solve_quadratic

ITER_TOL = 2 * math.pi * 0.01  # rad/s
MAX_FP_ITERS = 10


def _nearest(problem, config, omega, delta, seed):
    cfg = config.with_(target=omega, nev=1, ncv=max(20, config.ncv // 2))
    try:
        ms = solve_quadratic(problem, cfg, seed=seed, source_delta=delta)
    except NoConvergenceError as exc:
        ms = exc.partial
    if len(ms) == 0:
        return None
    return ms[0]


def solve_nonlinear_iterative(problem, config: SolverConfig, seed=None, iter_tol: float = ITER_TOL,
                              max_fp_iters: int = MAX_FP_ITERS) -> ModeSet:
    """Fixed-point iteration started from each of the ``nev`` cold modes.

    Returns one mode per cold mode. ``Mode.history`` lists the iterates
    ``w_0, w_1, ...`` and ``Mode.converged`` is false when the step never fell
    below ``iter_tol`` within ``max_fp_iters``; neither case raises. The
    reported residual is measured with the true ``F`` at the last iterate.
    """
    t0 = time.perf_counter()
    sp = as_split(problem)
    try:
        cold = solve_quadratic(sp, config, seed=seed)
    except NoConvergenceError as exc:
        cold = exc.partial
    modes = []
    solves = 1
    for m0 in cold:
        omega = m0.omega
        history = [omega]
        shape = m0.shape
        converged = sp.S is None
        if not converged:
            for _ in range(max_fp_iters):
                nxt = _nearest(sp, config, omega, sp.source_coefficient(omega), seed)
                solves += 1
                if nxt is None:
                    break
                step = abs(nxt.omega - omega)
                omega, shape = nxt.omega, nxt.shape
                history.append(omega)
                if step <= iter_tol:
                    converged = True
                    break
        modes.append(Mode(omega, shape, sp.residual(omega, shape), history=history,
                          converged=converged))
    diag = {"path": "iterative", "quadratic_solves": solves,
            "iterations": [len(m.history) - 1 for m in modes],
            "factorizations": sp.stats.factorizations,
            "nonconverged": sum(not m.converged for m in modes),
            "iter_tol": iter_tol, "max_fp_iters": max_fp_iters,
            "wall_time": time.perf_counter() - t0}
    return ModeSet(modes, config.target, diag)
