"""
Finite-volume discretization of the thermoacoustic Helmholtz equation.

Every row is divided by its cell volume, so the discrete problem reads

    F(w) P = [A + w B + w^2 C - sum_i e^{i w tau_i} S_i] P = 0

with ``C = I`` unless a frequency-dependent impedance contributes a ``w^2``
term. ``S_i = eta_i s g^T`` is rank one: ``s`` carries the per-cell heat
release weight and ``g`` evaluates the pressure gradient at the flame
reference cell along the reference direction.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .case import BoundaryKind, Case, FlameModel, GradientOrder, MeanFlowField
from .errors import GeometryError, SingularImpedanceError
from .linalg import as_complex_csr, frobenius, is_empty, write_matrix_market
from .mesh import Mesh

log = logging.getLogger(__name__)

IMPEDANCE_FLOOR = 1e-14


class ProblemKind(str, Enum):
    LINEAR = "Linear"
    QUADRATIC = "Quadratic"
    NONLINEAR = "Nonlinear"


@dataclass(frozen=True, eq=False)
class Rank1Source:
    """Delayed flame source ``D(w) = sum_i eta_i e^{i w tau_i} s g^T``.

    ``g`` is stored sparsely as ``(g_index, g_value)``.
    """

    s: np.ndarray
    g_index: np.ndarray
    g_value: np.ndarray
    terms: tuple  # ((eta_i, tau_i), ...)

    @property
    def n(self) -> int:
        return len(self.s)

    @property
    def is_empty(self) -> bool:
        return not np.any(self.s) or all(e == 0 for e, _ in self.terms)

    def g_dot(self, v) -> complex:
        """``g . v`` for a vector, or the row of ``g^T V`` for a matrix."""
        return self.g_value @ np.asarray(v)[self.g_index]

    def coefficient(self, omega) -> complex:
        """``sum_i eta_i e^{i w tau_i}``."""
        return sum(e * np.exp(1j * omega * t) for e, t in self.terms)

    def dcoefficient(self, omega) -> complex:
        return sum(1j * t * e * np.exp(1j * omega * t) for e, t in self.terms)

    def apply(self, omega, v) -> np.ndarray:
        """``D(w) v`` in O(N)."""
        return self.coefficient(omega) * self.g_dot(v) * self.s

    def g_dense(self) -> np.ndarray:
        g = np.zeros(self.n, dtype=complex)
        g[self.g_index] = self.g_value
        return g

    def matrix(self, term: int | None = None) -> sp.csr_matrix:
        """Sparse ``s g^T`` scaled by ``eta_term`` (unscaled when ``term`` is None)."""
        scale = 1.0 if term is None else self.terms[term][0]
        nz = np.flatnonzero(self.s)
        rows = np.repeat(nz, len(self.g_index))
        cols = np.tile(self.g_index, len(nz))
        vals = scale * np.outer(self.s[nz], self.g_value).ravel()
        return as_complex_csr(sp.coo_matrix((vals, (rows, cols)), shape=(self.n, self.n)))

    @property
    def base_norm(self) -> float:
        """Frobenius norm of ``s g^T``."""
        return float(np.linalg.norm(self.s) * np.linalg.norm(self.g_value))


@dataclass(frozen=True, eq=False)
class MatrixFreeOperator:
    """Second-order discrete ``div(c^2 grad p)`` applied without storing a matrix.

    Each interior face adds the skewness correction
    ``c_f^2 [gbar . A_f - (gbar . ds) |A_f|^2 / (ds . A_f)]`` to the first-order
    flux, where ``gbar`` is the mean of the owner and neighbor Green-Gauss cell
    gradients. The correction vanishes when ``ds`` is parallel to ``A_f``.
    """

    first_order: sp.csr_matrix
    gradient: tuple          # three N x N sparse Green-Gauss operators
    owner: np.ndarray
    neighbor: np.ndarray
    corr_vec: np.ndarray     # c_f^2 (A_f - ds |A_f|^2/(ds.A_f)), shape (nf, 3)
    inv_volume: np.ndarray

    @property
    def n(self) -> int:
        return self.first_order.shape[0]

    @property
    def shape(self):
        return (self.n, self.n)

    def correction(self, v) -> np.ndarray:
        v = np.asarray(v)
        grad = np.stack([G @ v for G in self.gradient], axis=-1)
        gbar = 0.5 * (grad[self.owner] + grad[self.neighbor])
        flux = np.einsum("fk,fk->f", gbar, self.corr_vec)
        out = np.zeros(self.n, dtype=np.result_type(v.dtype, np.complex128))
        out += np.bincount(self.owner, flux.real, self.n) + 1j * np.bincount(self.owner, flux.imag, self.n)
        out -= np.bincount(self.neighbor, flux.real, self.n) + 1j * np.bincount(self.neighbor, flux.imag, self.n)
        return out * self.inv_volume

    def apply(self, v) -> np.ndarray:
        return self.first_order @ v + self.correction(v)

    __matmul__ = apply

    def as_matrix(self) -> sp.csr_matrix:
        """Explicit sparse form (for small oracle checks only)."""
        nf = len(self.owner)
        rows = np.arange(nf)
        avg = 0.5 * (sp.csr_matrix((np.ones(nf), (rows, self.owner)), shape=(nf, self.n))
                     + sp.csr_matrix((np.ones(nf), (rows, self.neighbor)), shape=(nf, self.n)))
        flux = sum(sp.diags(self.corr_vec[:, k]) @ avg @ self.gradient[k] for k in range(3))
        scatter = (sp.csr_matrix((np.ones(nf), (self.owner, rows)), shape=(self.n, nf))
                   - sp.csr_matrix((np.ones(nf), (self.neighbor, rows)), shape=(self.n, nf)))
        return as_complex_csr(self.first_order + sp.diags(self.inv_volume) @ scatter @ flux)

    @cached_property
    def frobenius_estimate(self) -> float:
        return frobenius(self.first_order)


@dataclass(frozen=True, eq=False)
class AssembledProblem:
    A: sp.csr_matrix
    B: sp.csr_matrix | None
    C: sp.csr_matrix
    S: Rank1Source | None
    A2: MatrixFreeOperator | None = None
    kind: ProblemKind = ProblemKind.LINEAR
    mesh: Mesh | None = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return self.A.shape[0]

    @cached_property
    def norms(self) -> dict:
        return {"A": frobenius(self.A), "B": frobenius(self.B), "C": frobenius(self.C),
                "S": self.S.base_norm if self.S is not None else 0.0}


# ---------------------------------------------------------------------------
# geometric helpers

def _face_coefficients(mesh: Mesh):
    ds = mesh.face_ds
    area = mesh.face_area
    proj = np.einsum("ij,ij->i", ds, area)
    if np.any(proj <= 0):
        bad = int(np.argmin(proj))
        raise GeometryError(f"interior face {bad}: ds.A_f = {proj[bad]:g} <= 0")
    amag2 = np.einsum("ij,ij->i", area, area)
    return ds, area, proj, amag2


def _face_c2(mesh: Mesh, fields: MeanFlowField):
    return (0.5 * (fields.c[mesh.face_owner] + fields.c[mesh.face_neighbor])) ** 2


def _patch_kinds(mesh: Mesh, boundaries):
    by_id = {b.patch_id: b for b in boundaries}
    missing = [p.name for p in mesh.patches if p.patch_id not in by_id]
    if missing:
        raise KeyError(f"no boundary condition for patches {missing}")
    return by_id


def green_gauss_operators(mesh: Mesh, boundaries) -> tuple:
    """Sparse operators ``(Gx, Gy, Gz)`` mapping cell values to Green-Gauss gradients.

    Interior face values are arithmetic means of the adjacent cells. Boundary
    face values are 0 on ZeroPressure patches and the owner value elsewhere.
    """
    n = mesh.n_cells
    by_id = _patch_kinds(mesh, boundaries)
    inv_v = 1.0 / mesh.cell_volumes
    o, nb = mesh.face_owner, mesh.face_neighbor
    bo = mesh.bface_owner
    keep = np.array([by_id[int(p)].kind is not BoundaryKind.ZERO_PRESSURE for p in mesh.bface_patch],
                    dtype=bool) if mesh.n_bfaces else np.zeros(0, bool)
    ops = []
    for k in range(3):
        a = mesh.face_area[:, k]
        rows = np.concatenate([o, o, nb, nb, bo[keep]])
        cols = np.concatenate([o, nb, o, nb, bo[keep]])
        vals = np.concatenate([0.5 * a * inv_v[o], 0.5 * a * inv_v[o],
                               -0.5 * a * inv_v[nb], -0.5 * a * inv_v[nb],
                               mesh.bface_area[keep, k] * inv_v[bo[keep]]])
        G = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        G.sum_duplicates()
        G.eliminate_zeros()
        ops.append(G)
    return tuple(ops)


# ---------------------------------------------------------------------------
# operators

def assemble_wave_matrix(mesh: Mesh, fields: MeanFlowField, boundaries) -> sp.csr_matrix:
    """First-order explicit ``A`` (volume-normalized), including the ZeroPressure
    closure and the ``Z2`` part of GeneralImpedance patches."""
    n = mesh.n_cells
    by_id = _patch_kinds(mesh, boundaries)
    _, _, proj, amag2 = _face_coefficients(mesh)
    coef = _face_c2(mesh, fields) * amag2 / proj
    inv_v = 1.0 / mesh.cell_volumes
    o, nb = mesh.face_owner, mesh.face_neighbor
    rows = [o, o, nb, nb]
    cols = [o, nb, nb, o]
    vals = [-coef * inv_v[o], coef * inv_v[o], -coef * inv_v[nb], coef * inv_v[nb]]

    if mesh.n_bfaces:
        bo = mesh.bface_owner
        bds = mesh.bface_ds
        barea = mesh.bface_area
        bproj = np.einsum("ij,ij->i", bds, barea)
        if np.any(bproj <= 0):
            bad = int(np.argmin(bproj))
            raise GeometryError(f"boundary face {bad}: ds.A_f = {bproj[bad]:g} <= 0")
        bmag = np.linalg.norm(barea, axis=1)
        diag = np.zeros(mesh.n_bfaces, dtype=complex)
        for p in mesh.patches:
            spec = by_id[p.patch_id]
            sel = mesh.bface_patch == p.patch_id
            c_own = fields.c[bo[sel]]
            if spec.kind is BoundaryKind.ZERO_PRESSURE:
                diag[sel] = -c_own ** 2 * bmag[sel] ** 2 / bproj[sel]
            elif spec.kind is BoundaryKind.GENERAL_IMPEDANCE and spec.Z2 != 0:
                diag[sel] = 1j * c_own * bmag[sel] * spec.Z2
        rows.append(bo)
        cols.append(bo)
        vals.append(diag * inv_v[bo])
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return as_complex_csr(A)


def assemble_impedance_matrices(mesh: Mesh, fields: MeanFlowField, boundaries):
    """Return ``(B, C)``: ``B`` holds ``i c |A_f| / (Z V)`` on impedance-owner
    diagonals (``None`` when no impedance patch exists) and ``C = I`` plus the
    ``Z1`` contributions of GeneralImpedance patches."""
    n = mesh.n_cells
    by_id = _patch_kinds(mesh, boundaries)
    inv_v = 1.0 / mesh.cell_volumes
    b_diag = np.zeros(n, dtype=complex)
    c_diag = np.ones(n, dtype=complex)
    any_b = False
    if mesh.n_bfaces:
        bmag = np.linalg.norm(mesh.bface_area, axis=1)
        for p in mesh.patches:
            spec = by_id[p.patch_id]
            if not spec.is_impedance:
                continue
            sel = np.flatnonzero(mesh.bface_patch == p.patch_id)
            own = mesh.bface_owner[sel]
            w = 1j * fields.c[own] * bmag[sel] * inv_v[own]
            if spec.kind is BoundaryKind.CONSTANT_IMPEDANCE:
                if abs(spec.Z) < IMPEDANCE_FLOOR:
                    raise SingularImpedanceError(f"patch {p.name!r}: |Z| = {abs(spec.Z):.1e} is singular")
                np.add.at(b_diag, own, w / spec.Z)
                any_b = True
            else:
                if spec.Z0 is not None:
                    if abs(spec.Z0) < IMPEDANCE_FLOOR:
                        raise SingularImpedanceError(f"patch {p.name!r}: |Z0| = {abs(spec.Z0):.1e} is singular")
                    np.add.at(b_diag, own, w / spec.Z0)
                    any_b = True
                if spec.Z1 != 0:
                    np.add.at(c_diag, own, w * spec.Z1)
    B = as_complex_csr(sp.diags(b_diag)) if any_b else None
    if B is not None and B.nnz == 0:
        B = None
    return B, as_complex_csr(sp.diags(c_diag))


def assemble_source(mesh: Mesh, fields: MeanFlowField, boundaries, flame: FlameModel) -> Rank1Source | None:
    """Rank-one flame source, or ``None`` when the flame has no effect.

    ``s_k = q_k (gamma_k - 1) Q_tot / (rho_ref U_bulk)`` (the gain ``eta_i`` of
    each delay term is applied separately) and ``g`` is the Green-Gauss gradient
    at the reference cell projected onto the reference direction.
    """
    if flame is None:
        return None
    s = fields.q_norm * (fields.gamma - 1.0) * flame.Q_tot / (flame.rho_ref * flame.U_bulk)
    if not np.any(s):
        log.warning("flame present but q_norm is zero everywhere; source dropped")
        return None
    if all(e == 0 for e, _ in flame.terms):
        return None
    G = green_gauss_operators(mesh, boundaries)
    d = np.asarray(flame.ref_dir, dtype=float)
    row = sum(d[k] * G[k].getrow(flame.ref_cell) for k in range(3))
    row = sp.csr_matrix(row)
    row.sum_duplicates()
    row.eliminate_zeros()
    return Rank1Source(s.astype(complex), row.indices.copy(), row.data.astype(complex), flame.terms)


def make_second_order_operator(mesh: Mesh, fields: MeanFlowField, boundaries) -> MatrixFreeOperator:
    ds, area, proj, amag2 = _face_coefficients(mesh)
    c2 = _face_c2(mesh, fields)
    corr = c2[:, None] * (area - ds * (amag2 / proj)[:, None])
    return MatrixFreeOperator(
        first_order=assemble_wave_matrix(mesh, fields, boundaries),
        gradient=green_gauss_operators(mesh, boundaries),
        owner=np.asarray(mesh.face_owner),
        neighbor=np.asarray(mesh.face_neighbor),
        corr_vec=corr,
        inv_volume=1.0 / mesh.cell_volumes,
    )


def classify_problem(problem: AssembledProblem) -> ProblemKind:
    if problem.S is not None and not problem.S.is_empty:
        return ProblemKind.NONLINEAR
    if not is_empty(problem.B):
        return ProblemKind.QUADRATIC
    return ProblemKind.LINEAR


def assemble(case: Case, matrix_free: bool | None = None) -> AssembledProblem:
    """Assemble every operator of ``case``.

    The matrix-free second-order operator is attached when ``matrix_free`` is
    true, or, by default, when the case asks for second-order gradients on a
    mesh with skewed faces.
    """
    mesh, fields, bcs = case.mesh, case.fields, case.boundaries
    A = assemble_wave_matrix(mesh, fields, bcs)
    B, C = assemble_impedance_matrices(mesh, fields, bcs)
    S = assemble_source(mesh, fields, bcs, case.flame)
    if matrix_free is None:
        matrix_free = (case.solver.gradient_order is GradientOrder.SECOND
                       and mesh.n_faces > 0 and float(mesh.skewness().max()) > 1e-10)
    A2 = make_second_order_operator(mesh, fields, bcs) if matrix_free else None
    prob = AssembledProblem(A, B, C, S, A2, ProblemKind.LINEAR, mesh)
    object.__setattr__(prob, "kind", classify_problem(prob))
    return prob


def dump_matrices(problem: AssembledProblem, directory) -> list:
    """Write A, B, C (and s, g when a source exists) as Matrix Market files."""
    os.makedirs(directory, exist_ok=True)
    written = []
    items = [("A", problem.A), ("B", problem.B), ("C", problem.C)]
    if problem.S is not None:
        items += [("s", problem.S.s[:, None]), ("g", problem.S.g_dense()[:, None])]
    for name, M in items:
        if M is None:
            continue
        path = os.path.join(directory, f"{name}.mtx")
        write_matrix_market(path, M)
        written.append(path)
    return written
