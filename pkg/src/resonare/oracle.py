"""
Independent reference solutions: closed-form duct and cavity modes, dense
eigensolvers, and a determinant scan for the nonlinear problem.

Nothing here depends on :mod:`resonare.eigen`, so the solvers can be checked
against it without sharing code paths.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import OracleError

LINEAR_CAP = 512
COMPANION_CAP = 256
DETERMINANT_CAP = 64
BRANCH_TOL = 1e-12


@dataclass(frozen=True)
class AnalyticModeTable:
    """Mode numbers ``m`` and complex frequencies ``f`` [Hz], ordered by ``Re f``."""

    m: tuple
    f: tuple

    def __len__(self):
        return len(self.f)

    @property
    def frequencies(self) -> np.ndarray:
        return np.array(self.f, dtype=complex)

    @property
    def omegas(self) -> np.ndarray:
        return 2 * math.pi * self.frequencies


def cavity_modes(L: float, c0: float, Z: complex, m_max: int = 3,
                 m_values=None) -> AnalyticModeTable:
    """Modes of a hard-walled duct closed at one end with impedance ``Z`` at the other.

    ``f_m = m c0/(2L) + c0/(2 pi L) arctan(-i/Z)`` on the principal branch,
    keeping the ``m_max`` lowest modes with positive real frequency, or exactly
    the mode numbers in ``m_values`` when given. The arctangent is singular
    where ``-i/Z = +-i``, i.e. at ``Z = -+1``; ``Z = 0`` is excluded as well.
    """
    if not (L > 0 and c0 > 0):
        raise OracleError("L and c0 must be positive")
    Z = complex(Z)
    if abs(Z) < BRANCH_TOL or min(abs(Z - 1), abs(Z + 1)) < BRANCH_TOL:
        raise OracleError(f"impedance {Z} sits on a branch point of the cavity formula")
    shift = c0 / (2 * math.pi * L) * cmath.atan(-1j / Z)
    if m_values is not None:
        ms = tuple(int(m) for m in m_values)
        return AnalyticModeTable(ms, tuple(complex(m * c0 / (2 * L) + shift) for m in ms))
    floor = 1e-9 * c0 / L
    ms, fs = [], []
    m = 0
    while len(fs) < m_max:
        f = m * c0 / (2 * L) + shift
        if f.real > floor:
            ms.append(m)
            fs.append(complex(f))
        m += 1
    return AnalyticModeTable(tuple(ms), tuple(fs))


def resistive_growth_hz(L: float, c0: float, a: float) -> float:
    """``Im f = -(c0/(4 pi L)) ln((a+1)/(a-1))`` for a real impedance ``|a| > 1``."""
    if abs(a) <= 1:
        raise OracleError("resistive growth formula needs |a| > 1")
    return -(c0 / (4 * math.pi * L)) * math.log((a + 1) / (a - 1))


def duct_modes(L: float, c: float, left_bc: str = "Closed", right_bc: str = "Closed",
               m_max: int = 3) -> AnalyticModeTable:
    """Standing-wave frequencies of a uniform duct.

    Like ends give ``m c/(2L)``, mixed ends ``(2m - 1) c/(4L)``.
    """
    for bc in (left_bc, right_bc):
        if bc not in ("Closed", "Open"):
            raise OracleError(f"end condition must be 'Closed' or 'Open', got {bc!r}")
    ms = tuple(range(1, m_max + 1))
    if left_bc == right_bc:
        fs = tuple(complex(m * c / (2 * L)) for m in ms)
    else:
        fs = tuple(complex((2 * m - 1) * c / (4 * L)) for m in ms)
    return AnalyticModeTable(ms, fs)


def _dense(M) -> np.ndarray:
    return M.toarray() if hasattr(M, "toarray") else np.asarray(M)


def _sqrt_nonneg(lam: np.ndarray) -> np.ndarray:
    w = np.sqrt(lam.astype(complex))
    flip = (w.real < 0) | ((w.real == 0) & (w.imag < 0))
    w[flip] = -w[flip]
    return w


def dense_linear_oracle(A, C, how_many: int | None = None, squared: bool = False) -> np.ndarray:
    """All ``w`` (or ``w^2``) with ``(A + w^2 C) p = 0`` by dense QZ, sorted by magnitude."""
    A, C = _dense(A), _dense(C)
    if A.shape[0] > LINEAR_CAP:
        raise OracleError(f"dense linear oracle is capped at N = {LINEAR_CAP}")
    lam = sla.eigvals(A, -C)
    lam = lam[np.isfinite(lam)]
    vals = lam if squared else _sqrt_nonneg(lam)
    vals = vals[np.argsort(np.abs(vals), kind="stable")]
    return vals if how_many is None else vals[:how_many]


def dense_companion_oracle(A, B, C) -> np.ndarray:
    """Eigenvalues of ``A + w B + w^2 C`` from the ``2N`` companion pencil.

    Solves ``[[0, I], [-A, -B]] z = w [[I, 0], [0, C]] z`` with dense QZ and
    returns the finite values sorted by magnitude.
    """
    A, B, C = _dense(A), _dense(B), _dense(C)
    n = A.shape[0]
    if n > COMPANION_CAP:
        raise OracleError(f"dense companion oracle is capped at N = {COMPANION_CAP}")
    I, Z = np.eye(n), np.zeros((n, n))
    L0 = np.block([[Z, I], [-A, -B]])
    L1 = np.block([[I, Z], [Z, C]])
    w = sla.eigvals(L0, L1)
    w = w[np.isfinite(w)]
    return w[np.argsort(np.abs(w), kind="stable")]


def dense_operator(assembled):
    """``w -> F(w)`` as a dense array, built directly from the assembled matrices."""
    A = _dense(assembled.A).astype(complex)
    B = None if assembled.B is None else _dense(assembled.B).astype(complex)
    C = _dense(assembled.C).astype(complex)
    S = assembled.S
    sg = None
    if S is not None and np.any(S.s):
        g = np.zeros(A.shape[0], dtype=complex)
        np.add.at(g, S.g_index, S.g_value)
        sg = np.outer(S.s, g)
        terms = [(complex(e), float(t)) for e, t in S.terms]

    def F(omega):
        M = A + omega * omega * C
        if B is not None:
            M = M + omega * B
        if sg is not None:
            M = M - sum(e * cmath.exp(1j * omega * t) for e, t in terms) * sg
        return M

    return F


def _log_det(F, w) -> complex:
    sign, logabs = np.linalg.slogdet(F(w))
    return complex(logabs) + 1j * cmath.phase(sign) if sign != 0 else complex(-np.inf)


def determinant_scan_oracle(F, region, grid=(60, 60), max_newton: int = 50,
                            tol: float = 1e-12, dedupe: float = 1e-8) -> np.ndarray:
    """Roots of ``det F(w)`` inside the rectangle ``region = (re0, re1, im0, im1)``.

    ``log|det F|`` is sampled on the grid; every local minimum seeds a complex
    Newton iteration on ``det F`` whose derivative is a central difference
    with step ``1e-6`` times the region diameter. Converged
    roots inside the region (inflated by 1%) are returned sorted by real part
    with duplicates within ``dedupe`` relative merged.
    """
    nx, ny = grid
    if nx < 50 or ny < 50:
        raise OracleError("determinant scan needs at least a 50 x 50 grid")
    n = F(complex(region[0], region[2])).shape[0]
    if n > DETERMINANT_CAP:
        raise OracleError(f"determinant oracle is capped at N = {DETERMINANT_CAP}")
    x0, x1, y0, y1 = region
    xs = np.linspace(x0, x1, nx)
    ys = np.linspace(y0, y1, ny)
    logabs = np.empty((nx, ny))
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            logabs[i, j] = np.linalg.slogdet(F(complex(x, y)))[1]
    padded = np.pad(logabs, 1, constant_values=np.inf)
    centre = padded[1:-1, 1:-1]
    is_min = np.ones_like(centre, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                is_min &= centre <= padded[1 + di:nx + 1 + di, 1 + dj:ny + 1 + dj]
    h = 1e-6 * math.hypot(x1 - x0, y1 - y0)
    dx, dy = 0.01 * (x1 - x0), 0.01 * (y1 - y0)
    roots = []
    for i, j in zip(*np.nonzero(is_min)):
        w = complex(xs[i], ys[j])
        ok = False
        for _ in range(max_newton):
            # Newton on det F; det(w +- h)/det(w) stays finite near a root
            base = _log_det(F, w)
            if not np.isfinite(base.real):
                ok = True
                break
            r_plus = cmath.exp(_log_det(F, w + h) - base)
            r_minus = cmath.exp(_log_det(F, w - h) - base)
            slope = r_plus - r_minus
            if slope == 0 or not cmath.isfinite(slope):
                break
            step = -2 * h / slope
            w = w + step
            if abs(step) <= tol * max(abs(w), 1.0):
                ok = True
                break
        if ok and (x0 - dx <= w.real <= x1 + dx) and (y0 - dy <= w.imag <= y1 + dy):
            if all(abs(w - r) > dedupe * abs(w) for r in roots):
                roots.append(w)
    roots.sort(key=lambda z: (z.real, z.imag))
    return np.array(roots, dtype=complex)
