"""
Complex sparse kernels: canonical CSR storage, LU factorization handles,
restarted GMRES with left preconditioning, and iterated classical Gram-Schmidt.

Storage, the sparse LU and Matrix Market I/O delegate to scipy. GMRES and the
orthogonalization are written out here because the eigensolvers depend on
their exact breakdown and reorthogonalization behavior.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidArgument, NoConvergenceError, SingularMatrixError

DENSE_FALLBACK_MAX = 2000
_EPS = np.finfo(float).eps


def as_complex_csr(M) -> sp.csr_matrix:
    """Return ``M`` as complex128 CSR with sorted, unique, nonzero entries."""
    if sp.issparse(M):
        out = sp.csr_matrix(M, dtype=np.complex128, copy=True)
    else:
        out = sp.csr_matrix(np.asarray(M, dtype=np.complex128))
    out.sum_duplicates()
    out.eliminate_zeros()
    out.sort_indices()
    return out


def is_empty(M) -> bool:
    return M is None or (sp.issparse(M) and M.nnz == 0)


def frobenius(M) -> float:
    if M is None:
        return 0.0
    if sp.issparse(M):
        return float(np.sqrt(np.sum(np.abs(M.data) ** 2)))
    return float(np.linalg.norm(M))


# ---------------------------------------------------------------------------
# LU

class FactorHandle:
    """Reusable LU factorization of a square complex matrix.

    ``method='auto'`` picks dense LAPACK LU for ``N <= 2000`` and SuperLU
    otherwise. A factorization whose smallest pivot falls below
    ``N * eps * max|pivot|`` is rejected as singular.
    """

    def __init__(self, M, method: str = "auto"):
        if M.shape[0] != M.shape[1]:
            raise InvalidArgument(f"matrix must be square, got {M.shape}")
        self.n = M.shape[0]
        if method == "auto":
            method = "dense" if self.n <= DENSE_FALLBACK_MAX else "sparse"
        if method not in ("dense", "sparse"):
            raise InvalidArgument(f"unknown LU method {method!r}")
        self.method = method
        if method == "dense":
            dense = M.toarray() if sp.issparse(M) else np.asarray(M)
            dense = np.asarray(dense, dtype=np.complex128)
            self._lu, self._piv = sla.lu_factor(dense, check_finite=True)
            pivots = np.abs(np.diag(self._lu))
            self._check(pivots, lambda k: int(k))
        else:
            csc = sp.csc_matrix(M, dtype=np.complex128)
            try:
                self._lu = spla.splu(csc, permc_spec="COLAMD")
            except RuntimeError as exc:
                raise SingularMatrixError(f"sparse LU failed: {exc}") from None
            pivots = np.abs(self._lu.U.diagonal())
            perm_c = self._lu.perm_c
            self._check(pivots, lambda k: int(perm_c[k]))

    def _check(self, pivots, row_of):
        big = pivots.max() if pivots.size else 0.0
        k = int(np.argmin(pivots)) if pivots.size else 0
        if pivots.size and (big == 0.0 or pivots[k] <= self.n * _EPS * big):
            raise SingularMatrixError(
                f"matrix is singular to working precision: pivot {pivots[k]:.3e} "
                f"vs largest {big:.3e} at row {row_of(k)}", row=row_of(k))

    @property
    def nnz(self) -> int:
        """Stored entries of the factors."""
        if self.method == "dense":
            return self.n * self.n
        return int(self._lu.L.nnz + self._lu.U.nnz)

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=np.complex128)
        if self.method == "dense":
            return sla.lu_solve((self._lu, self._piv), b, check_finite=False)
        return self._lu.solve(b)

    __call__ = solve


def lu_factor(M, method: str = "auto") -> FactorHandle:
    return FactorHandle(M, method)


# ---------------------------------------------------------------------------
# orthogonalization

def orthogonalize(V: np.ndarray, w: np.ndarray, breakdown_tol: float = 1e-14):
    """Orthogonalize ``w`` against the orthonormal columns of ``V``.

    Classical Gram-Schmidt with one reorthogonalization pass when the norm
    drops below ``1/sqrt(2)`` of its value before the pass (DGKS test).

    Returns
    -------
    h : ndarray
        Projection coefficients, accumulated over both passes.
    beta : float
        Norm of the orthogonalized vector.
    q : ndarray
        ``w`` orthogonalized and scaled to unit norm (unnormalized on breakdown).
    breakdown : bool
        True when ``beta <= breakdown_tol * |w|``, i.e. ``w`` lies in span(V).
    """
    w = np.array(w, dtype=np.complex128, copy=True)
    norm0 = np.linalg.norm(w)
    k = V.shape[1] if V is not None else 0
    h = np.zeros(k, dtype=np.complex128)
    if k == 0:
        beta = norm0
    else:
        before = norm0
        for _ in range(2):
            c = V.conj().T @ w
            w -= V @ c
            h += c
            beta = np.linalg.norm(w)
            if beta > before / math.sqrt(2.0):
                break
            before = beta
    breakdown = bool(beta <= breakdown_tol * norm0) or norm0 == 0.0
    q = w if breakdown else w / beta
    return h, float(beta), q, breakdown


class OrthoBasis:
    """Growing orthonormal basis stored column-wise in a preallocated array."""

    def __init__(self, n: int, capacity: int):
        self.V = np.zeros((n, capacity), dtype=np.complex128)
        self.k = 0

    @property
    def basis(self) -> np.ndarray:
        return self.V[:, :self.k]

    def append(self, w, rng=None):
        """Add ``w``; on breakdown a random vector is used instead.

        Returns ``(h, beta, breakdown)``; on breakdown ``beta`` is the (tiny)
        residual norm of ``w`` and the stored column is the random replacement.
        """
        if self.k == self.V.shape[1]:
            raise InvalidArgument("basis is full")
        h, beta, q, breakdown = orthogonalize(self.basis, w)
        if breakdown:
            rng = rng or np.random.default_rng(self.k)
            while True:
                r = rng.standard_normal(self.V.shape[0]) + 1j * rng.standard_normal(self.V.shape[0])
                _, _, q, bad = orthogonalize(self.basis, r)
                if not bad:
                    break
        self.V[:, self.k] = q
        self.k += 1
        return h, beta, breakdown

    def orthogonality_error(self) -> float:
        return orthogonality_error(self.basis)


def orthogonality_error(V: np.ndarray) -> float:
    """``max |V^H V - I|`` entrywise."""
    if V.shape[1] == 0:
        return 0.0
    G = V.conj().T @ V
    return float(np.max(np.abs(G - np.eye(G.shape[0]))))


# ---------------------------------------------------------------------------
# GMRES

@dataclass
class GmresResult:
    x: np.ndarray
    iterations: int
    residual: float
    precond_residual: float
    history: list = field(default_factory=list)


def gmres(apply, b, precond=None, tol: float = 1e-10, max_iter: int = 500,
          restart: int = 50, x0=None) -> GmresResult:
    """Restarted GMRES(m) with left preconditioning.

    Solves ``apply(x) = b``. The Arnoldi process runs on ``P^{-1} apply``
    where ``precond`` is any object with a ``solve`` method (typically a
    :class:`FactorHandle`), and the iteration stops once either the
    preconditioned residual ``|P^{-1}(b - apply(x))| / |P^{-1} b|`` or the true
    residual ``|b - apply(x)| / |b|`` is at most ``tol``. Both are reported;
    ``history`` records the preconditioned relative residual after every
    iteration.

    Raises
    ------
    NoConvergenceError
        After ``max_iter`` total iterations; ``partial`` is the best iterate.
    """
    b = np.asarray(b, dtype=np.complex128)
    n = b.shape[0]
    psolve = (lambda v: v) if precond is None else precond.solve
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return GmresResult(np.zeros(n, dtype=np.complex128), 0, 0.0, 0.0, [])
    x = np.zeros(n, dtype=np.complex128) if x0 is None else np.array(x0, dtype=np.complex128)
    pb_norm = np.linalg.norm(psolve(b))
    history = []
    total = 0
    best_x, best_res = x.copy(), math.inf

    while True:
        r_true = b - apply(x)
        true_res = np.linalg.norm(r_true) / bnorm
        if true_res < best_res:
            best_x, best_res = x.copy(), true_res
        r = psolve(r_true)
        beta = np.linalg.norm(r)
        prec_res = beta / pb_norm
        if true_res <= tol or prec_res <= tol:
            return GmresResult(x, total, true_res, prec_res, history)
        if total >= max_iter:
            raise NoConvergenceError(
                f"GMRES did not reach {tol:.1e} in {max_iter} iterations "
                f"(true residual {best_res:.2e}, preconditioned {prec_res:.2e})",
                partial=best_x, history=history)

        m = min(restart, max_iter - total)
        V = np.zeros((n, m + 1), dtype=np.complex128)
        H = np.zeros((m + 1, m), dtype=np.complex128)
        cs = np.zeros(m, dtype=np.complex128)
        sn = np.zeros(m, dtype=np.complex128)
        g = np.zeros(m + 1, dtype=np.complex128)
        V[:, 0] = r / beta
        g[0] = beta
        j_done = 0
        for j in range(m):
            w = psolve(apply(V[:, j]))
            h, hn, q, breakdown = orthogonalize(V[:, :j + 1], w)
            H[:j + 1, j] = h
            H[j + 1, j] = hn
            # apply previous rotations, then build the new one
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -np.conj(sn[i]) * H[i, j] + np.conj(cs[i]) * H[i + 1, j]
                H[i, j] = t
            a, bb = H[j, j], H[j + 1, j]
            denom = math.hypot(abs(a), abs(bb))
            if denom == 0.0:
                cs[j], sn[j] = 1.0, 0.0
            elif abs(a) == 0.0:
                cs[j], sn[j] = 0.0, 1.0
            else:
                cs[j] = abs(a) / denom
                sn[j] = (a / abs(a)) * np.conj(bb) / denom
            H[j, j], H[j + 1, j] = _rotate(cs[j], sn[j], a, bb)
            g[j], g[j + 1] = _rotate(cs[j], sn[j], g[j], 0.0)
            total += 1
            j_done = j + 1
            history.append(abs(g[j + 1]) / pb_norm)
            if breakdown:
                break
            V[:, j + 1] = q
            # stop the cycle slightly below tol so the restart check passes
            if abs(g[j + 1]) / pb_norm <= 0.1 * tol:
                break
        y = sla.solve_triangular(H[:j_done, :j_done], g[:j_done])
        x = x + V[:, :j_done] @ y


def _rotate(c, s, a, b):
    """Apply the Givens rotation [[c, s], [-conj(s), c]] to (a, b)."""
    return c * a + s * b, -np.conj(s) * a + c * b


# ---------------------------------------------------------------------------
# Matrix Market

def write_matrix_market(path, M, comment: str = "") -> None:
    scipy.io.mmwrite(path, sp.coo_matrix(M) if sp.issparse(M) else np.atleast_2d(M), comment=comment)


def read_matrix_market(path) -> sp.csr_matrix:
    M = scipy.io.mmread(path)
    return as_complex_csr(M)
