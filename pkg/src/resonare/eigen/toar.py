"""
TOAR for ``(A + w B + w^2 C) P = 0``.

With the parameter scaling ``w = rho theta``, ``rho = sqrt(|A|_F / |C|_F)``, the
problem becomes ``A + theta (rho B) + theta^2 (rho^2 C)``; its first companion
linearization is

    L0 - theta L1,   L0 = [[0, I], [-A, -rho B]],   L1 = diag(I, rho^2 C),

acting on ``[x; theta x]``. Shift-and-invert Arnoldi on ``(L0 - s L1)^{-1} L1``
needs only one N x N factorization of ``P(s) = A + s rho B + s^2 rho^2 C`` and
keeps both blocks in the span of a single orthonormal ``Q``.
"""
from __future__ import annotations

import math
import time

import numpy as np

from ..case import SolverConfig
from ..errors import NoConvergenceError, SingularMatrixError
from .krylov import CompactBasis, krylov_schur
from .linear import as_split
from .modes import Mode, ModeSet, normalize_shape
from .problem import SplitProblem, start_vector

SHIFT_RETRY = 1j * 2 * math.pi


def refine_mode(sp: SplitProblem, shift_solver, omega, x, tol, steps: int = 3, source_delta=None):
    """Residual-inverse-iteration polish followed by a scalar Newton update.

    ``shift_solver`` solves with ``F`` at a nearby fixed shift. Stops as soon as
    the residual meets ``tol``.
    """
    x = x / np.linalg.norm(x)
    res = sp.residual(omega, x)
    for _ in range(steps):
        if res <= tol:
            break
        x_new = x - shift_solver.solve(sp.apply_F(omega, x))
        x_new /= np.linalg.norm(x_new)
        Fx = sp.apply_F(omega, x_new)
        dFx = sp.apply_dF(omega, x_new)
        denom = np.vdot(x_new, dFx)
        omega_new = omega - np.vdot(x_new, Fx) / denom if denom != 0 else omega
        res_new = sp.residual(omega_new, x_new)
        if not res_new < res:
            break
        omega, x, res = omega_new, x_new, res_new
    return complex(omega), x, res


class _QuadraticView:
    """Quadratic ``A' + w B + w^2 C`` with ``A' = A - delta s g^T`` (``delta`` fixed)."""

    def __init__(self, sp: SplitProblem, delta: complex):
        self.sp = sp
        self.delta = complex(delta)

    def residual(self, omega, x):
        sp = self.sp
        r = sp.apply_combination(1.0, omega, omega * omega, self.delta, x)
        n = sp.norms
        scale = n["A"] + abs(omega) * n["B"] + abs(omega) ** 2 * n["C"] + abs(self.delta) * n["S"]
        return float(np.linalg.norm(r) / (scale * np.linalg.norm(x)))

    def apply_F(self, omega, x):
        return self.sp.apply_combination(1.0, omega, omega * omega, self.delta, x)

    def apply_dF(self, omega, x):
        out = 2 * omega * (self.sp.C @ x)
        if self.sp.B is not None:
            out = out + self.sp.B @ x
        return out


def solve_quadratic(problem, config: SolverConfig, scaling: bool = True, seed=None,
                    source_delta: complex = 0.0, keep_negative: bool = False,
                    nev_internal: int | None = None) -> ModeSet:
    """``nev`` modes nearest ``config.target``.

    ``source_delta`` freezes the flame source at ``A - delta s g^T``, which is
    how the fixed-point baseline reuses this solver. Modes with ``Re w < 0``
    (mirror images of the reported ones) are dropped unless ``keep_negative``.
    """
    t0 = time.perf_counter()
    sp = as_split(problem)
    view = _QuadraticView(sp, source_delta)
    n = sp.norms
    nA = n["A"] + abs(source_delta) * n["S"]
    rho = math.sqrt(nA / n["C"]) if (scaling and nA > 0 and n["C"] > 0) else 1.0
    sigma = complex(config.target)
    retried = False
    try:
        solver = sp.solver(1.0, sigma, sigma * sigma, source_delta)
    except SingularMatrixError:
        sigma += SHIFT_RETRY
        retried = True
        solver = sp.solver(1.0, sigma, sigma * sigma, source_delta)
    s = sigma / rho
    C_hat = (rho * rho) * sp.C
    B = sp.B

    def step(Qr, a):
        y1 = Qr @ a[0]
        y2 = Qr @ a[1]
        rhs = C_hat @ (y2 + s * y1)
        if B is not None:
            rhs = rhs + rho * (B @ y1)
        z0 = -solver.solve(rhs)
        W = np.zeros_like(a)
        W[1] = a[0]
        return z0, np.array([1.0, s]), W

    nev_int = nev_internal or (2 * config.nev + 2)
    ncv = max(config.ncv, 2 * nev_int)
    v = start_vector(sp.n, seed)
    basis = CompactBasis(step, v, 2, ncv, seed=seed or 0)
    res = krylov_schur(basis, nev_int, ncv, config.tol, config.restart_fraction, config.max_restarts)

    X0 = basis.vectors(res.coords, 0)
    X1 = basis.vectors(res.coords, 1)
    modes = []
    for i, mu in enumerate(res.values):
        theta = s + 1.0 / mu
        x = X0[:, i] if abs(theta) <= 1.0 else X1[:, i] / theta
        omega = rho * theta
        if abs(omega) < config.omega_min:
            continue
        if not keep_negative and omega.real < 0:
            continue
        omega, x, r = refine_mode(view, solver, omega, x, config.tol)
        modes.append(Mode(omega, normalize_shape(x), r))
    modes.sort(key=lambda m: abs(m.omega - config.target))
    modes = modes[:config.nev]
    diag = {"path": "quadratic", "iterations": res.iterations, "restarts": res.restarts,
            "factorizations": sp.stats.factorizations, "orthogonality": res.orthogonality,
            "scaling": rho, "shift_retried": retried,
            "gmres_iterations": list(sp.stats.gmres_iterations),
            "wall_time": time.perf_counter() - t0}
    out = ModeSet(modes, config.target, diag)
    bad = [m for m in modes if not m.residual <= config.tol]
    if not res.converged or len(modes) < config.nev or bad:
        raise NoConvergenceError(
            f"quadratic solve converged {len(modes) - len(bad)} of {config.nev} modes", partial=out)
    return out
