"""
NLEIGS for ``F(w) = A + w B + w^2 C - sum_i eta_i e^{i w tau_i} s g^T``.

``F`` is interpolated on a rectangle of the complex plane in a scaled Newton
basis ``b_0 = 1``, ``b_j(w) = b_{j-1}(w) (w - sigma_{j-1}) / beta_j`` with Leja
nodes ``sigma_j`` taken on the rectangle boundary. The exponential is entire,
so no poles are placed and the rational basis reduces to a polynomial one.

The degree-``d`` interpolant ``R(w) = sum_j b_j(w) D_j`` is linearized as a
``dN`` pencil; shift-and-invert Arnoldi on it needs a single factorization of
``R(s)`` and keeps all blocks in one shared orthonormal basis, exactly like
TOAR. Each ``D_j`` stays in split form: scalar multiples of ``A``, ``B``,
``C`` and the rank-one source.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from ..case import SolverConfig
from ..errors import InterpolationFailure, InvalidArgument, NoConvergenceError
from .krylov import CompactBasis, krylov_schur
from .linear import as_split
from .modes import Mode, ModeSet, normalize_shape
from .problem import SplitProblem, start_vector
from .toar import refine_mode

N_CANDIDATES = 4000
DEGREE_TOL = 1e-12
DEGREE_FAIL = 1e-8


def rectangle_boundary(region, count: int = N_CANDIDATES) -> np.ndarray:
    """``count`` points spread uniformly along the boundary of the rectangle."""
    x0, x1, y0, y1 = region
    w, h = x1 - x0, y1 - y0
    t = np.arange(count) * (2 * (w + h) / count)
    pts = np.empty(count, dtype=complex)
    for i, s in enumerate(t):
        if s < w:
            pts[i] = complex(x0 + s, y0)
        elif s < w + h:
            pts[i] = complex(x1, y0 + s - w)
        elif s < 2 * w + h:
            pts[i] = complex(x1 - (s - w - h), y1)
        else:
            pts[i] = complex(x0, y1 - (s - 2 * w - h))
    return pts


def leja_nodes(candidates: np.ndarray, count: int):
    """Greedy Leja sequence over ``candidates`` with Newton-basis scalings.

    Returns ``(nodes, betas)`` where ``betas[j]`` (``j >= 1``) normalizes
    ``max |b_j|`` over the candidates to 1; ``betas[0] = 1``.
    """
    nodes = np.empty(count, dtype=complex)
    betas = np.ones(count)
    logprod = np.zeros(len(candidates))
    b = np.ones(len(candidates), dtype=complex)
    start = int(np.argmax(np.abs(candidates - candidates.mean())))
    nodes[0] = candidates[start]
    for j in range(1, count):
        dist = np.abs(candidates - nodes[j - 1])
        with np.errstate(divide="ignore"):
            logprod += np.log(dist)
        b = b * (candidates - nodes[j - 1])
        betas[j] = np.max(np.abs(b))
        b /= betas[j]
        nodes[j] = candidates[int(np.argmax(logprod))]
    return nodes, betas


@dataclass
class RationalInterpolant:
    """Split-form interpolant ``R(w) = sum_j b_j(w) D_j``.

    ``D_j = a[j] A + b[j] B + c[j] C - e[j] s g^T`` where ``e[j]`` already
    includes the gains ``eta_i``.
    """

    nodes: np.ndarray
    betas: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    e: np.ndarray
    degree: int
    ratios: np.ndarray

    def basis(self, w) -> np.ndarray:
        """``[b_0(w), ..., b_d(w)]``."""
        out = np.empty(self.degree + 1, dtype=complex)
        out[0] = 1.0
        for j in range(1, self.degree + 1):
            out[j] = out[j - 1] * (w - self.nodes[j - 1]) / self.betas[j]
        return out

    def coefficients(self, w):
        """Scalar weights ``(alpha, beta, gamma, delta)`` of ``R(w)`` in split form."""
        bw = self.basis(w)
        d = self.degree + 1
        return (bw @ self.a[:d], bw @ self.b[:d], bw @ self.c[:d], bw @ self.e[:d])


def divided_differences(func, nodes, betas):
    """Newton coefficients of ``func`` (a matrix function) on the scaled basis."""
    n = len(nodes)
    H = np.diag(nodes.astype(complex))
    H[np.arange(1, n), np.arange(n - 1)] = betas[1:]
    return func(H)[:, 0]


def build_interpolant(sp: SplitProblem, region, degree_max: int = 60,
                      tol: float = DEGREE_TOL) -> RationalInterpolant:
    """Interpolate ``F`` on ``region``, growing the degree until the trailing
    coefficient norm falls below ``tol`` relative to the largest one."""
    cand = rectangle_boundary(region)
    nodes, betas = leja_nodes(cand, degree_max + 1)
    n = degree_max + 1
    a = np.zeros(n, dtype=complex)
    a[0] = 1.0
    H = np.diag(nodes)
    H[np.arange(1, n), np.arange(n - 1)] = betas[1:]
    e0 = np.zeros(n, dtype=complex)
    e0[0] = 1.0
    b = H @ e0
    c = H @ b
    e = np.zeros(n, dtype=complex)
    if sp.S is not None:
        for eta, tau in sp.S.terms:
            if eta != 0:
                e += eta * sla.expm(1j * tau * H)[:, 0]
    norms = sp.norms
    dnorm = np.abs(a) * norms["A"] + np.abs(b) * norms["B"] + np.abs(c) * norms["C"] + np.abs(e) * norms["S"]
    running = np.maximum.accumulate(dnorm)
    ratios = dnorm / running
    degree = None
    for j in range(2, n - 1):
        if ratios[j] <= tol and ratios[j + 1] <= tol:
            degree = j
            break
    if degree is None:
        if ratios[-1] > DEGREE_FAIL:
            raise InterpolationFailure(
                f"interpolation did not converge by degree {degree_max} (ratio {ratios[-1]:.1e}); "
                "use a smaller region or raise nleigs_degree_max")
        degree = n - 1
    return RationalInterpolant(nodes, betas, a, b, c, e, degree, ratios)


def _region_contains(region, w, inflate: float = 0.01) -> bool:
    x0, x1, y0, y1 = region
    dx, dy = inflate * (x1 - x0), inflate * (y1 - y0)
    return (x0 - dx <= w.real <= x1 + dx) and (y0 - dy <= w.imag <= y1 + dy)


def solve_nonlinear_nleigs(problem, config: SolverConfig, shift=None, seed=None,
                           max_nev: int = 64) -> ModeSet:
    """All modes inside ``config.region``.

    Ritz values are computed nearest the shift (default: region center); the
    wanted count is doubled until the converged set reaches beyond the farthest
    corner of the region or ``max_nev`` is hit. Every eigenpair is refined and
    residual-checked against the true ``F`` and only those inside the region
    (inflated by 1%) are returned.
    """
    t0 = time.perf_counter()
    if config.region is None:
        raise InvalidArgument("NLEIGS needs a region")
    sp = as_split(problem)
    region = config.region
    x0, x1, y0, y1 = region
    s = complex(0.5 * (x0 + x1), 0.5 * (y0 + y1)) if shift is None else complex(shift)
    interp = build_interpolant(sp, region, config.nleigs_degree_max)
    d = interp.degree
    alpha, beta, gamma, delta = interp.coefficients(s)
    solver = sp.solver(alpha, beta, gamma, delta)
    bs = interp.basis(s)
    nodes, betas = interp.nodes, interp.betas
    cB, cC, cE = interp.b, interp.c, interp.e
    B, C, S = sp.B, sp.C, sp.S

    def step(Qr, a):
        r = Qr.shape[1]
        W = np.zeros((d + 1, r), dtype=complex)
        for j in range(1, d + 1):
            W[j] = (a[j - 1] + (s - nodes[j - 1]) * W[j - 1]) / betas[j]
        # -sum_{j>=1} D_j Q w_j; A only enters D_0, B only D_1, C only D_1 and D_2
        y1 = Qr @ W[1]
        rhs = cC[1] * (C @ y1)
        if d >= 2:
            rhs = rhs + cC[2] * (C @ (Qr @ W[2]))
        if B is not None:
            rhs = rhs + cB[1] * (B @ y1)
        if S is not None:
            gw = (cE[1:d + 1] @ W[1:]) @ (S.g_value @ Qr[S.g_index])
            rhs = rhs - gw * S.s
        z0 = solver.solve(-rhs)
        return z0, bs[:d], W[:d]

    corner = max(abs(complex(x, y) - s) for x in (x0, x1) for y in (y0, y1))
    nev_int = max(config.nev, 4)
    total_iter, total_restart, orth = 0, 0, []
    while True:
        ncv = max(config.ncv, 2 * nev_int + 10)
        basis = CompactBasis(step, start_vector(sp.n, seed), d, ncv, seed=seed or 0)
        res = krylov_schur(basis, nev_int, ncv, config.tol, config.restart_fraction, config.max_restarts)
        total_iter += res.iterations
        total_restart += res.restarts
        orth += res.orthogonality
        lam = s + 1.0 / res.values
        reach = np.max(np.abs(lam - s)) if len(lam) else 0.0
        if reach >= corner or nev_int >= max_nev or not res.converged:
            break
        nev_int = min(2 * nev_int, max_nev)

    X = basis.vectors(res.coords, 0)
    modes, rejected = [], []
    for i, w in enumerate(lam):
        if not _region_contains(region, w, 0.05):
            continue
        w_ref, x, r = refine_mode(sp, solver, w, X[:, i], config.tol)
        if not _region_contains(region, w_ref):
            continue
        if abs(w_ref) < config.omega_min:
            continue
        mode = Mode(w_ref, normalize_shape(x), r)
        (modes if r <= config.tol else rejected).append(mode)
    diag = {"path": "nleigs", "degree": d, "iterations": total_iter, "restarts": total_restart,
            "factorizations": sp.stats.factorizations, "orthogonality": orth,
            "nev_internal": nev_int, "shift": s, "covered_region": bool(reach >= corner),
            "gmres_iterations": list(sp.stats.gmres_iterations),
            "wall_time": time.perf_counter() - t0}
    out = ModeSet(modes, s, diag)
    if not res.converged:
        raise NoConvergenceError(
            f"NLEIGS: Krylov-Schur did not converge {nev_int} Ritz pairs within "
            f"{config.max_restarts} restarts", partial=out)
    if rejected:
        raise NoConvergenceError(
            f"NLEIGS: {len(rejected)} in-region eigenpairs failed the residual check", partial=out)
    return out
