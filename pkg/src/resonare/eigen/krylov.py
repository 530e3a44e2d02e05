"""
Krylov-Schur restarted Arnoldi over pluggable basis representations.

The driver maintains a Krylov decomposition ``Op V_m = V_m H_m + v_{m+1} b^T``
and only talks to the basis through ``expand``, ``compress`` and
``orthogonality_error``. Two representations are provided:

* :class:`ArnoldiBasis` stores full-length vectors (linear problems),
* :class:`CompactBasis` stores ``d``-block vectors as ``[Q U_0; ...; Q U_{d-1}]``
  with one shared orthonormal ``Q`` (TOAR-style, used for the quadratic and
  interpolated nonlinear linearizations).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from ..linalg import orthogonality_error, orthogonalize


def _random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class ArnoldiBasis:
    """Full-vector Arnoldi basis for a linear operator ``op``."""

    def __init__(self, op, v0, capacity: int, seed: int = 0):
        n = len(v0)
        self.op = op
        self.dim = n
        self.V = np.zeros((n, capacity + 1), dtype=complex)
        self.V[:, 0] = v0 / np.linalg.norm(v0)
        self.k = 1
        self.rng = np.random.default_rng(seed)

    def expand(self):
        w = self.op(self.V[:, self.k - 1])
        h, beta, q, breakdown = orthogonalize(self.V[:, :self.k], w)
        if breakdown:
            q = self._fresh_direction()
            beta = 0.0
        self.V[:, self.k] = q
        self.k += 1
        return h, beta, breakdown

    def _fresh_direction(self):
        if self.k >= self.dim:
            return np.zeros(self.dim, dtype=complex)
        while True:
            _, _, q, bad = orthogonalize(self.V[:, :self.k], _random_complex(self.rng, self.dim))
            if not bad:
                return q

    def compress(self, Z):
        m, k = Z.shape
        last = self.V[:, m].copy()
        self.V[:, :k] = self.V[:, :m] @ Z
        self.V[:, k] = last
        self.V[:, k + 1:] = 0.0
        self.k = k + 1

    def vectors(self, Y, block: int = 0):
        return self.V[:, :Y.shape[0]] @ Y

    def orthogonality_error(self) -> float:
        # a zero column marks an exhausted space, not a loss of orthogonality
        V = self.V[:, :self.k]
        return orthogonality_error(V[:, np.any(V != 0, axis=0)])


class CompactBasis:
    """Two-level orthogonal basis for a ``d``-block linearization.

    ``step(Qr, a)`` receives the shared basis ``Q`` (N x r) and the coordinates
    ``a`` (d x r) of the last Krylov vector, and returns ``(z0, b, W)`` with the
    new vector's blocks given by ``z_j = b_j z0 + Qr W_j``.
    """

    def __init__(self, step, v0, d: int, capacity: int, seed: int = 0):
        n = len(v0)
        self.step = step
        self.d = d
        self.n = n
        self.dim = n * d
        rmax = capacity + d + 2
        self.Q = np.zeros((n, rmax), dtype=complex)
        self.U = np.zeros((d, rmax, capacity + 1), dtype=complex)
        self.Q[:, 0] = v0 / np.linalg.norm(v0)
        self.U[0, 0, 0] = 1.0
        self.r = 1
        self.k = 1
        self.rng = np.random.default_rng(seed)

    def _coords(self, r=None, k=None):
        r = self.r if r is None else r
        k = self.k if k is None else k
        return self.U[:, :r, :k].reshape(self.d * r, k)

    def expand(self):
        r, j = self.r, self.k - 1
        a = self.U[:, :r, j]
        z0, b, W = self.step(self.Q[:, :r], a)
        h, alpha, q, tiny = orthogonalize(self.Q[:, :r], z0)
        if not tiny and r < self.n:
            self.Q[:, r] = q
            zc = np.concatenate([h, [alpha]])
            r_new = r + 1
        else:
            zc = h
            r_new = r
        coords = np.zeros((self.d, r_new), dtype=complex)
        for i in range(self.d):
            coords[i] = b[i] * zc
            coords[i, :r] += W[i]
        self.r = r_new
        hcol, beta, qq, breakdown = orthogonalize(self._coords(r_new, self.k), coords.ravel())
        if breakdown:
            qq = self._fresh_direction()
            beta = 0.0
        self.U[:, :self.r, self.k] = qq.reshape(self.d, self.r)
        self.k += 1
        return hcol, beta, breakdown

    def _fresh_direction(self):
        # random vector in the full space, expressed in an enlarged Q
        w = _random_complex(self.rng, (self.d, self.n))
        for i in range(self.d):
            _, _, q, bad = orthogonalize(self.Q[:, :self.r], w[i])
            if not bad and self.r < self.n:
                self.Q[:, self.r] = q
                self.r += 1
        coords = np.stack([self.Q[:, :self.r].conj().T @ w[i] for i in range(self.d)])
        _, _, qq, bad = orthogonalize(self._coords(self.r, self.k), coords.ravel())
        if bad:
            return np.zeros(self.d * self.r, dtype=complex)
        return qq

    def compress(self, Z):
        m, k = Z.shape
        r, d = self.r, self.d
        U = np.empty((d, r, k + 1), dtype=complex)
        U[:, :, :k] = self.U[:, :r, :m] @ Z
        U[:, :, k] = self.U[:, :r, m]
        # shrink Q to the range actually used by the kept vectors
        M = np.concatenate([U[i] for i in range(d)], axis=1)
        P, sv, _ = np.linalg.svd(M, full_matrices=False)
        rank = max(1, int(np.sum(sv > sv[0] * 1e-14 * max(r, 1))))
        P = P[:, :rank]
        self.Q[:, :rank] = self.Q[:, :r] @ P
        self.Q[:, rank:] = 0.0
        self.U[:] = 0.0
        for i in range(d):
            self.U[i, :rank, :k + 1] = P.conj().T @ U[i]
        self.r = rank
        self.k = k + 1

    def vectors(self, Y, block: int = 0):
        """Block ``block`` of the Ritz vectors with coefficient columns ``Y``."""
        return self.Q[:, :self.r] @ (self.U[block, :self.r, :Y.shape[0]] @ Y)

    def orthogonality_error(self) -> float:
        """``max |V^H V - I|`` of the implied full-length basis."""
        Qr = self.Q[:, :self.r]
        G = Qr.conj().T @ Qr
        U = self.U[:, :self.r, :self.k]
        U = U[:, :, np.any(U != 0, axis=(0, 1))]
        VhV = sum(U[i].conj().T @ G @ U[i] for i in range(self.d))
        return float(max(np.max(np.abs(VhV - np.eye(U.shape[2]))),
                         np.max(np.abs(G - np.eye(self.r)))))


@dataclass
class KrylovSchurResult:
    values: np.ndarray
    coords: np.ndarray
    residuals: np.ndarray
    converged: bool
    iterations: int = 0
    restarts: int = 0
    orthogonality: list = field(default_factory=list)


def krylov_schur(basis, nev: int, ncv: int, tol: float, restart_fraction: float = 0.5,
                 max_restarts: int = 200, priority=None) -> KrylovSchurResult:
    """Compute the ``nev`` Ritz pairs of largest ``priority`` (default ``|theta|``).

    A Ritz pair ``(theta, y)`` of the projected matrix is accepted when its
    Arnoldi residual ``|b^T y|`` is at most ``tol * |theta|``. At every restart
    the ``ceil(restart_fraction * ncv)`` most wanted Ritz values are kept via a
    sorted complex Schur form.
    """
    priority = priority or np.abs
    m = min(ncv, basis.dim)
    nev = min(nev, m)
    H = np.zeros((m + 1, m), dtype=complex)
    k = 0
    iterations = 0
    orth = []
    keep_target = min(max(int(math.ceil(restart_fraction * m)), nev), m - 1) if m > 1 else 0

    for restart in range(max_restarts + 1):
        for j in range(k, m):
            h, beta, _ = basis.expand()
            H[:j + 1, j] = h
            H[j + 1, j] = beta
            iterations += 1
        T = H[:m, :m].copy()
        b = H[m, :m].copy()
        theta, Y = sla.eig(T)
        Y /= np.linalg.norm(Y, axis=0)
        pr = priority(theta)
        order = np.argsort(-pr, kind="stable")
        res = np.abs(b @ Y)
        ok = res <= tol * np.abs(theta)
        wanted = order[:nev]
        orth.append(basis.orthogonality_error())
        if np.all(ok[wanted]) or m == basis.dim:
            return KrylovSchurResult(theta[wanted], Y[:, wanted], res[wanted], True,
                                     iterations, restart, orth)
        if restart == max_restarts:
            conv = wanted[ok[wanted]]
            return KrylovSchurResult(theta[conv], Y[:, conv], res[conv], False,
                                     iterations, restart, orth)

        # keep the most wanted values; widen the cut until it falls in a gap
        nconv = int(np.sum(ok[wanted]))
        keep = max(keep_target, min(nconv + 1, m - 1))
        sorted_pr = pr[order]
        while keep < m - 1 and sorted_pr[keep - 1] - sorted_pr[keep] <= 1e-10 * abs(sorted_pr[keep - 1]):
            keep += 1
        thr = 0.5 * (sorted_pr[keep - 1] + sorted_pr[keep])
        S, Z, sdim = sla.schur(T, output="complex", sort=lambda x: priority(np.array([x]))[0] > thr)
        k = int(sdim)
        if k == 0 or k >= m:
            # reordering disagreed with the cut; use an orthonormal basis of the
            # wanted eigenvectors, whose span is still invariant under T
            k = keep
            Z, _ = np.linalg.qr(Y[:, order[:k]])
            S = Z.conj().T @ T @ Z
        basis.compress(Z[:, :k])
        H[:] = 0.0
        H[:k, :k] = S[:k, :k]
        H[k, :k] = b @ Z[:, :k]
    raise AssertionError("unreachable")
