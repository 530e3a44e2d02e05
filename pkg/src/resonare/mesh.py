"""
Cell/face meshes for the finite-volume Helmholtz discretization.

A :class:`Mesh` is purely geometric: cell centroids and volumes, interior faces
with owner/neighbor connectivity, and boundary faces grouped into patches.
Boundary closure happens later in assembly, so there are no ghost cells.

Three generators are provided:

* :func:`build_1d_mesh` -- a uniform line of cells with unit cross-section,
* :func:`build_block_mesh` -- conforming multi-block boxes (2D blocks are
  extruded one cell deep with unit depth),
* :func:`skew_mesh` -- a seeded random perturbation of interior nodes, used to
  exercise the skewness correction of the face gradient.

Meshes round-trip through a small CSV schema (``cells.csv``, ``faces.csv``,
``patches.csv``), see :func:`write_mesh_csv`.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, InvalidArgument, MeshConformityError

_SIDES = ("xmin", "xmax", "ymin", "ymax", "zmin", "zmax")


@dataclass(frozen=True)
class Patch:
    patch_id: int
    name: str


@dataclass(frozen=True)
class Block:
    """Axis-aligned box with a structured cell layout."""

    origin: tuple
    extents: tuple
    cell_counts: tuple
    name: str | None = None


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable finite-volume mesh.

    Interior-face area vectors point from ``face_owner`` to ``face_neighbor``;
    boundary-face area vectors point out of the domain.
    """

    cell_centroids: np.ndarray
    cell_volumes: np.ndarray
    face_owner: np.ndarray
    face_neighbor: np.ndarray
    face_area: np.ndarray
    face_centroid: np.ndarray
    bface_owner: np.ndarray
    bface_area: np.ndarray
    bface_centroid: np.ndarray
    bface_patch: np.ndarray
    patches: tuple
    nodes: np.ndarray | None = None
    face_nodes: np.ndarray | None = None
    bface_nodes: np.ndarray | None = None
    extruded_axes: tuple = ()
    _patch_index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for name in ("cell_centroids", "cell_volumes", "face_owner", "face_neighbor",
                     "face_area", "face_centroid", "bface_owner", "bface_area",
                     "bface_centroid", "bface_patch", "nodes", "face_nodes", "bface_nodes"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.array(arr, copy=True)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)
        ids = [p.patch_id for p in self.patches]
        if len(set(ids)) != len(ids):
            raise InvalidArgument("patch ids must be unique")
        self._patch_index.update({p.name: p for p in self.patches})
        self._validate()

    def _validate(self):
        if np.any(self.cell_volumes <= 0):
            bad = int(np.argmin(self.cell_volumes))
            raise GeometryError(f"cell {bad} has non-positive volume {self.cell_volumes[bad]:g}")
        if np.any(np.linalg.norm(self.face_area, axis=1) <= 0) or \
                np.any(np.linalg.norm(self.bface_area, axis=1) <= 0):
            raise GeometryError("zero-area face")
        if self.n_faces:
            proj = np.einsum("ij,ij->i", self.face_ds, self.face_area)
            if np.any(proj <= 0):
                bad = int(np.argmin(proj))
                raise GeometryError(f"interior face {bad} has ds.A_f = {proj[bad]:g} <= 0")
        if self.n_bfaces:
            proj = np.einsum("ij,ij->i", self.bface_ds, self.bface_area)
            if np.any(proj <= 0):
                bad = int(np.argmin(proj))
                raise GeometryError(f"boundary face {bad} has ds.A_f = {proj[bad]:g} <= 0")

    @property
    def n_cells(self) -> int:
        return len(self.cell_volumes)

    @property
    def n_faces(self) -> int:
        return len(self.face_owner)

    @property
    def n_bfaces(self) -> int:
        return len(self.bface_owner)

    @property
    def face_ds(self) -> np.ndarray:
        """Owner-centroid to neighbor-centroid vectors of the interior faces."""
        return self.cell_centroids[self.face_neighbor] - self.cell_centroids[self.face_owner]

    @property
    def bface_ds(self) -> np.ndarray:
        """Owner-centroid to face-centroid vectors of the boundary faces."""
        return self.bface_centroid - self.cell_centroids[self.bface_owner]

    def patch(self, name: str) -> Patch:
        try:
            return self._patch_index[name]
        except KeyError:
            raise KeyError(f"no patch named {name!r}; have {sorted(self._patch_index)}") from None

    @property
    def patch_names(self) -> list:
        return [p.name for p in self.patches]

    def patch_faces(self, name: str) -> np.ndarray:
        return np.flatnonzero(self.bface_patch == self.patch(name).patch_id)

    def locate(self, point) -> int:
        """Index of the cell whose centroid is nearest ``point``."""
        d = self.cell_centroids - np.asarray(point, dtype=float)[None, :]
        return int(np.argmin(np.einsum("ij,ij->i", d, d)))

    def skewness(self) -> np.ndarray:
        """Per interior face |ds x A_f| / (|ds| |A_f|)."""
        ds = self.face_ds
        cross = np.linalg.norm(np.cross(ds, self.face_area), axis=1)
        return cross / (np.linalg.norm(ds, axis=1) * np.linalg.norm(self.face_area, axis=1))

    def closure_defect(self) -> np.ndarray:
        """Per cell |sum of outward area vectors| / total face area (0 when watertight)."""
        acc = np.zeros((self.n_cells, 3))
        mag = np.zeros(self.n_cells)
        amag = np.linalg.norm(self.face_area, axis=1)
        bmag = np.linalg.norm(self.bface_area, axis=1)
        for k in range(3):
            acc[:, k] += np.bincount(self.face_owner, self.face_area[:, k], self.n_cells)
            acc[:, k] -= np.bincount(self.face_neighbor, self.face_area[:, k], self.n_cells)
            acc[:, k] += np.bincount(self.bface_owner, self.bface_area[:, k], self.n_cells)
        mag += np.bincount(self.face_owner, amag, self.n_cells)
        mag += np.bincount(self.face_neighbor, amag, self.n_cells)
        mag += np.bincount(self.bface_owner, bmag, self.n_cells)
        return np.linalg.norm(acc, axis=1) / mag


# ---------------------------------------------------------------------------
# 1D line mesh

def build_1d_mesh(length: float, n_cells: int) -> Mesh:
    """Uniform line of ``n_cells`` cells along x with unit cross-section area.

    The two end faces form the patches ``left`` (x = 0) and ``right`` (x = length).
    """
    if not length > 0:
        raise InvalidArgument(f"length must be positive, got {length}")
    if int(n_cells) != n_cells or n_cells < 2:
        raise InvalidArgument(f"n_cells must be an integer >= 2, got {n_cells}")
    n = int(n_cells)
    x = np.linspace(0.0, length, n + 1)
    dx = np.diff(x)
    centroids = np.zeros((n, 3))
    centroids[:, 0] = 0.5 * (x[:-1] + x[1:])
    ex = np.tile([1.0, 0.0, 0.0], (n - 1, 1))
    fc = np.zeros((n - 1, 3))
    fc[:, 0] = x[1:-1]
    return Mesh(
        cell_centroids=centroids,
        cell_volumes=dx,
        face_owner=np.arange(n - 1),
        face_neighbor=np.arange(1, n),
        face_area=ex,
        face_centroid=fc,
        bface_owner=np.array([0, n - 1]),
        bface_area=np.array([[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]),
        bface_centroid=np.array([[0.0, 0.0, 0.0], [length, 0.0, 0.0]]),
        bface_patch=np.array([0, 1]),
        patches=(Patch(0, "left"), Patch(1, "right")),
        extruded_axes=(1, 2),
    )


# ---------------------------------------------------------------------------
# geometry from quadrilateral faces

def _face_triangles(nodes, quads):
    """Fan-triangulate quads around their node average.

    Returns per-triangle area vectors and centroids, shape (nf, 4, 3).
    """
    p = nodes[quads]                       # (nf, 4, 3)
    m = p.mean(axis=1, keepdims=True)      # (nf, 1, 3)
    q = np.roll(p, -1, axis=1)
    area = 0.5 * np.cross(q - p, m - p)
    centroid = (p + q + m) / 3.0
    return area, centroid


def _geometry(nodes, quads, owner, neighbor, n_cells):
    """Face areas/centroids and cell volumes/centroids for a hex-dominant mesh.

    ``quads`` covers every face (interior first, then boundary), ``neighbor`` is
    -1 for boundary faces. Cells are decomposed into tetrahedra spanned by each
    face triangle and the average of the cell's face centroids.
    """
    tri_area, tri_cent = _face_triangles(nodes, quads)
    area = tri_area.sum(axis=1)
    tri_mag = np.linalg.norm(tri_area, axis=2)
    fcent = np.einsum("ft,ftk->fk", tri_mag, tri_cent) / tri_mag.sum(axis=1)[:, None]

    interior = neighbor >= 0
    count = np.bincount(owner, minlength=n_cells) + np.bincount(neighbor[interior], minlength=n_cells)
    apex = np.zeros((n_cells, 3))
    for k in range(3):
        apex[:, k] = (np.bincount(owner, fcent[:, k], n_cells)
                      + np.bincount(neighbor[interior], fcent[interior, k], n_cells))
    apex /= count[:, None]

    volume = np.zeros(n_cells)
    moment = np.zeros((n_cells, 3))

    def accumulate(cells, sign, a, c):
        rel = c - apex[cells][:, None, :]
        vol = sign * np.einsum("ftk,ftk->ft", a, rel) / 3.0
        tet_c = 0.25 * apex[cells][:, None, :] + 0.75 * c
        volume[:] += np.bincount(cells, vol.sum(axis=1), n_cells)
        for k in range(3):
            moment[:, k] += np.bincount(cells, (vol * tet_c[:, :, k]).sum(axis=1), n_cells)

    accumulate(owner, 1.0, tri_area, tri_cent)
    accumulate(neighbor[interior], -1.0, tri_area[interior], tri_cent[interior])
    centroid = moment / volume[:, None]
    return area, fcent, volume, centroid


# ---------------------------------------------------------------------------
# multi-block boxes

def _as_block(spec) -> Block:
    if isinstance(spec, Block):
        return spec
    try:
        return Block(tuple(spec["origin"]), tuple(spec["extents"]),
                     tuple(spec["cell_counts"]), spec.get("name"))
    except KeyError as exc:
        raise InvalidArgument(f"block spec missing {exc.args[0]!r}") from None


def _hex_faces(nx, ny, nz, node_id, cell_id):
    """Interior and boundary quads of one structured block.

    Quads are ordered so that 0.5*(c-a)x(d-b) points along +axis; min-side
    boundary quads are reversed to point outward.
    """
    interior, bound = [], []
    cells = cell_id

    def quad(axis, i, j, k):
        # node corners of the face normal to `axis` at lattice position (i, j, k)
        if axis == 0:
            c = [(i, j, k), (i, j + 1, k), (i, j + 1, k + 1), (i, j, k + 1)]
        elif axis == 1:
            c = [(i, j, k), (i, j, k + 1), (i + 1, j, k + 1), (i + 1, j, k)]
        else:
            c = [(i, j, k), (i + 1, j, k), (i + 1, j + 1, k), (i, j + 1, k)]
        return np.stack([node_id[a] for a in c], axis=-1)

    shape = (nx, ny, nz)
    for axis in range(3):
        n_ax = shape[axis]
        rng = [np.arange(s) for s in shape]
        # faces at lattice planes 0..n_ax
        for plane in range(n_ax + 1):
            idx = list(rng)
            idx[axis] = np.array([plane])
            ii, jj, kk = np.meshgrid(*idx, indexing="ij")
            ii, jj, kk = ii.ravel(), jj.ravel(), kk.ravel()
            q = quad(axis, ii, jj, kk)
            if 0 < plane < n_ax:
                lo = [ii, jj, kk]
                lo[axis] = lo[axis] - 1
                interior.append((cells[tuple(lo)], cells[ii, jj, kk], q))
            elif plane == 0:
                bound.append((cells[ii, jj, kk], q[:, ::-1], _SIDES[2 * axis]))
            else:
                lo = [ii, jj, kk]
                lo[axis] = lo[axis] - 1
                bound.append((cells[tuple(lo)], q, _SIDES[2 * axis + 1]))
    return interior, bound


def build_block_mesh(blocks) -> Mesh:
    """Merge axis-aligned structured blocks into one conforming mesh.

    Each block is a :class:`Block` or a mapping with ``origin``, ``extents``,
    ``cell_counts`` and optional ``name``. Two-component blocks describe 2D
    geometry and are extruded one cell deep with unit depth in z.

    Faces shared by two blocks become interior faces. Remaining exterior faces
    are grouped per block side into patches named ``<side>`` for a single block
    and ``<name>_<side>`` otherwise (``b<i>`` when a block has no name), where
    side is one of xmin, xmax, ymin, ymax, zmin, zmax. Empty patches are
    dropped.
    """
    blocks = [_as_block(b) for b in blocks]
    if not blocks:
        raise InvalidArgument("at least one block is required")
    dims = {len(b.origin) for b in blocks} | {len(b.extents) for b in blocks} | \
        {len(b.cell_counts) for b in blocks}
    if dims not in ({2}, {3}):
        raise InvalidArgument("blocks must all be 2D or all be 3D")
    planar = dims == {2}
    if planar:
        blocks = [Block(tuple(b.origin) + (0.0,), tuple(b.extents) + (1.0,),
                        tuple(b.cell_counts) + (1,), b.name) for b in blocks]
    for b in blocks:
        if any(not e > 0 for e in b.extents):
            raise InvalidArgument(f"block extents must be positive, got {b.extents}")
        if any(int(c) != c or c < 1 for c in b.cell_counts):
            raise InvalidArgument(f"cell counts must be positive integers, got {b.cell_counts}")

    lo = np.array([b.origin for b in blocks], dtype=float)
    hi = lo + np.array([b.extents for b in blocks], dtype=float)
    scale = float(np.max(hi) - np.min(lo))
    tol = 1e-9 * scale
    for a in range(len(blocks)):
        for b in range(a + 1, len(blocks)):
            overlap = np.minimum(hi[a], hi[b]) - np.maximum(lo[a], lo[b])
            if np.all(overlap > tol):
                raise MeshConformityError(f"blocks {a} and {b} overlap")

    # nodes, merged across blocks by quantized coordinates
    coords, node_ids, n_nodes = [], [], 0
    for b in blocks:
        nx, ny, nz = (int(c) for c in b.cell_counts)
        axes = [np.linspace(b.origin[d], b.origin[d] + b.extents[d], n + 1)
                for d, n in enumerate((nx, ny, nz))]
        X, Y, Z = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([X, Y, Z], axis=-1)
        coords.append(pts.reshape(-1, 3))
        node_ids.append(n_nodes + np.arange(pts.shape[0] * pts.shape[1] * pts.shape[2]).reshape(pts.shape[:3]))
        n_nodes += pts.shape[0] * pts.shape[1] * pts.shape[2]
    coords = np.concatenate(coords)
    keys = np.round((coords - coords.min(axis=0)) / tol).astype(np.int64)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    nodes = np.zeros((len(uniq), 3))
    nodes[inverse] = coords

    owners, neighbors, quads = [], [], []
    b_owner, b_quad, b_block, b_side = [], [], [], []
    cell_offset = 0
    for bi, b in enumerate(blocks):
        nx, ny, nz = (int(c) for c in b.cell_counts)
        cell_id = cell_offset + np.arange(nx * ny * nz).reshape(nx, ny, nz)
        nid = inverse[node_ids[bi]]
        interior, bound = _hex_faces(nx, ny, nz, nid, cell_id)
        for o, n, q in interior:
            owners.append(o)
            neighbors.append(n)
            quads.append(q)
        for o, q, side in bound:
            b_owner.append(o)
            b_quad.append(q)
            b_block.append(np.full(len(o), bi))
            b_side.append(np.full(len(o), _SIDES.index(side)))
        cell_offset += nx * ny * nz
    n_cells = cell_offset

    f_owner = np.concatenate(owners) if owners else np.zeros(0, int)
    f_nb = np.concatenate(neighbors) if neighbors else np.zeros(0, int)
    f_quad = np.concatenate(quads) if quads else np.zeros((0, 4), int)
    b_owner = np.concatenate(b_owner)
    b_quad = np.concatenate(b_quad)
    b_block = np.concatenate(b_block)
    b_side = np.concatenate(b_side)

    # block interfaces: boundary quads sharing the same node set
    key = np.sort(b_quad, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    if np.any(counts > 2):
        raise MeshConformityError("a face is shared by more than two cells")
    paired = counts[inv] == 2
    if np.any(paired):
        idx = np.flatnonzero(paired)
        idx = idx[np.argsort(inv[idx], kind="stable")]
        primary, partner = idx[0::2], idx[1::2]
        f_owner = np.concatenate([f_owner, b_owner[primary]])
        f_nb = np.concatenate([f_nb, b_owner[partner]])
        f_quad = np.concatenate([f_quad, b_quad[primary]])
    keep = ~paired
    b_owner, b_quad, b_block, b_side = b_owner[keep], b_quad[keep], b_block[keep], b_side[keep]

    # any leftover exterior face lying inside another block's side is non-conforming
    tri_area, tri_cent = _face_triangles(nodes, b_quad)
    bcent = tri_cent.mean(axis=1)
    for bj in range(len(blocks)):
        for axis in range(3):
            for plane in (lo[bj, axis], hi[bj, axis]):
                others = b_block != bj
                on_plane = np.abs(bcent[:, axis] - plane) < tol
                inside = np.ones(len(bcent), dtype=bool)
                for d in range(3):
                    if d != axis:
                        inside &= (bcent[:, d] > lo[bj, d] + tol) & (bcent[:, d] < hi[bj, d] - tol)
                if np.any(others & on_plane & inside):
                    raise MeshConformityError(
                        f"block {bj} touches another block along {_SIDES[2 * axis + (plane == hi[bj, axis])]} "
                        "without matching faces")

    # patches
    multi = len(blocks) > 1
    patch_of = {}
    patches = []
    for bi, b in enumerate(blocks):
        for si, side in enumerate(_SIDES):
            if not np.any((b_block == bi) & (b_side == si)):
                continue
            prefix = (b.name or f"b{bi}") if multi else None
            name = f"{prefix}_{side}" if prefix else side
            patch_of[(bi, si)] = len(patches)
            patches.append(Patch(len(patches), name))
    b_patch = np.array([patch_of[(bi, si)] for bi, si in zip(b_block, b_side)], dtype=int)

    return _assemble_from_nodes(nodes, f_owner, f_nb, f_quad, b_owner, b_quad, b_patch,
                                tuple(patches), n_cells, (2,) if planar else ())


def _assemble_from_nodes(nodes, f_owner, f_nb, f_quad, b_owner, b_quad, b_patch,
                         patches, n_cells, extruded_axes):
    owner = np.concatenate([f_owner, b_owner])
    neighbor = np.concatenate([f_nb, np.full(len(b_owner), -1)])
    quads = np.concatenate([f_quad, b_quad])
    area, fcent, volume, centroid = _geometry(nodes, quads, owner, neighbor, n_cells)
    ni = len(f_owner)
    return Mesh(
        cell_centroids=centroid,
        cell_volumes=volume,
        face_owner=f_owner,
        face_neighbor=f_nb,
        face_area=area[:ni],
        face_centroid=fcent[:ni],
        bface_owner=b_owner,
        bface_area=area[ni:],
        bface_centroid=fcent[ni:],
        bface_patch=b_patch,
        patches=patches,
        nodes=nodes,
        face_nodes=f_quad,
        bface_nodes=b_quad,
        extruded_axes=tuple(extruded_axes),
    )


# ---------------------------------------------------------------------------
# skewing

def skew_mesh(mesh: Mesh, amplitude: float, seed: int = 0) -> Mesh:
    """Randomly displace interior nodes by up to ``amplitude`` x local spacing.

    Boundary nodes stay fixed, except that nodes on the faces closing an
    extruded (single-layer) direction move in-plane together with their
    extrusion partners, so 2D meshes stay prismatic. Geometry is recomputed
    from the displaced nodes. Meshes without node data (1D lines, CSV imports)
    are returned unchanged.
    """
    if not 0.0 <= amplitude < 0.5:
        raise InvalidArgument(f"amplitude must lie in [0, 0.5), got {amplitude}")
    if amplitude == 0.0 or mesh.nodes is None:
        return mesh
    nodes = np.array(mesh.nodes)
    n_nodes = len(nodes)
    free_axes = [d for d in range(3) if d not in mesh.extruded_axes]

    fixed = np.zeros(n_nodes, dtype=bool)
    normals = mesh.bface_area / np.linalg.norm(mesh.bface_area, axis=1)[:, None]
    axis_of = np.argmax(np.abs(normals), axis=1)
    walls = ~np.isin(axis_of, mesh.extruded_axes)
    fixed[mesh.bface_nodes[walls].ravel()] = True

    # local spacing per node and axis from incident quad edges
    quads = np.concatenate([mesh.face_nodes, mesh.bface_nodes])
    a = quads.ravel()
    b = np.roll(quads, -1, axis=1).ravel()
    edge = nodes[b] - nodes[a]
    edge_axis = np.argmax(np.abs(edge), axis=1)
    length = np.linalg.norm(edge, axis=1)
    h = np.full((n_nodes, 3), np.inf)
    for d in range(3):
        sel = edge_axis == d
        np.minimum.at(h[:, d], a[sel], length[sel])
        np.minimum.at(h[:, d], b[sel], length[sel])

    # nodes sharing free-axis coordinates (extrusion partners) move together
    span = float(np.ptp(nodes, axis=0).max())
    keys = np.round(nodes[:, free_axes] / (1e-9 * span)).astype(np.int64)
    _, group = np.unique(keys, axis=0, return_inverse=True)
    group = group.ravel()
    rng = np.random.default_rng(seed)
    disp = rng.uniform(-1.0, 1.0, size=(group.max() + 1, 3))[group]
    hg = np.full((group.max() + 1, 3), np.inf)
    for d in range(3):
        np.minimum.at(hg[:, d], group, h[:, d])
    fixed_g = np.zeros(group.max() + 1, dtype=bool)
    np.logical_or.at(fixed_g, group, fixed)

    move = ~fixed_g[group]
    for d in free_axes:
        step = amplitude * disp[:, d] * hg[group, d]
        nodes[move, d] += step[move]

    pids = {p.patch_id: p for p in mesh.patches}
    return _assemble_from_nodes(nodes, mesh.face_owner, mesh.face_neighbor, mesh.face_nodes,
                                mesh.bface_owner, mesh.bface_nodes, mesh.bface_patch,
                                tuple(pids[i] for i in sorted(pids)), mesh.n_cells,
                                mesh.extruded_axes)


# ---------------------------------------------------------------------------
# CSV exchange

def write_mesh_csv(mesh: Mesh, directory) -> list:
    """Write ``cells.csv``, ``faces.csv`` and ``patches.csv`` into ``directory``.

    ``faces.csv`` lists interior faces (neighbor >= 0, patch_id -1) followed by
    boundary faces (neighbor -1). The trailing face-centroid columns fx, fy, fz
    are optional on import.
    """
    os.makedirs(directory, exist_ok=True)
    paths = [os.path.join(directory, n) for n in ("cells.csv", "faces.csv", "patches.csv")]
    with open(paths[0], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "x", "y", "z", "volume"])
        for i, (c, v) in enumerate(zip(mesh.cell_centroids, mesh.cell_volumes)):
            w.writerow([i, repr(float(c[0])), repr(float(c[1])), repr(float(c[2])), repr(float(v))])
    with open(paths[1], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["owner", "neighbor", "Ax", "Ay", "Az", "patch_id", "fx", "fy", "fz"])
        for o, n, a, c in zip(mesh.face_owner, mesh.face_neighbor, mesh.face_area, mesh.face_centroid):
            w.writerow([int(o), int(n)] + [repr(float(x)) for x in a] + [-1] + [repr(float(x)) for x in c])
        for o, p, a, c in zip(mesh.bface_owner, mesh.bface_patch, mesh.bface_area, mesh.bface_centroid):
            w.writerow([int(o), -1] + [repr(float(x)) for x in a] + [int(p)] + [repr(float(x)) for x in c])
    with open(paths[2], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["patch_id", "name"])
        for p in mesh.patches:
            w.writerow([p.patch_id, p.name])
    return paths


def read_mesh_csv(directory) -> Mesh:
    """Load a mesh written by :func:`write_mesh_csv` (or produced externally).

    Without face-centroid columns, interior face centroids default to the
    midpoint between adjacent cell centroids and boundary face centroids to the
    owner centroid shifted half a cell along the outward normal.
    """
    with open(os.path.join(directory, "cells.csv"), newline="") as fh:
        rows = list(csv.DictReader(fh))
    rows.sort(key=lambda r: int(r["index"]))
    cent = np.array([[float(r["x"]), float(r["y"]), float(r["z"])] for r in rows])
    vol = np.array([float(r["volume"]) for r in rows])
    with open(os.path.join(directory, "faces.csv"), newline="") as fh:
        frows = list(csv.DictReader(fh))
    patches_path = os.path.join(directory, "patches.csv")
    if os.path.exists(patches_path):
        with open(patches_path, newline="") as fh:
            patches = tuple(Patch(int(r["patch_id"]), r["name"]) for r in csv.DictReader(fh))
    else:
        ids = sorted({int(r["patch_id"]) for r in frows if int(r["neighbor"]) < 0})
        patches = tuple(Patch(i, f"patch{i}") for i in ids)

    has_fc = bool(frows) and "fx" in frows[0] and frows[0]["fx"] not in (None, "")
    owner, nb, area, fc = [], [], [], []
    b_owner, b_area, b_patch, b_fc = [], [], [], []
    for r in frows:
        a = [float(r["Ax"]), float(r["Ay"]), float(r["Az"])]
        c = [float(r["fx"]), float(r["fy"]), float(r["fz"])] if has_fc else None
        if int(r["neighbor"]) >= 0:
            owner.append(int(r["owner"]))
            nb.append(int(r["neighbor"]))
            area.append(a)
            fc.append(c)
        else:
            b_owner.append(int(r["owner"]))
            b_area.append(a)
            b_patch.append(int(r["patch_id"]))
            b_fc.append(c)
    owner, nb = np.array(owner, dtype=int), np.array(nb, dtype=int)
    area = np.array(area, dtype=float).reshape(-1, 3)
    b_owner = np.array(b_owner, dtype=int)
    b_area = np.array(b_area, dtype=float).reshape(-1, 3)
    if has_fc:
        fc = np.array(fc, dtype=float).reshape(-1, 3)
        b_fc = np.array(b_fc, dtype=float).reshape(-1, 3)
    else:
        fc = 0.5 * (cent[owner] + cent[nb])
        amag = np.linalg.norm(b_area, axis=1)
        b_fc = cent[b_owner] + b_area / amag[:, None] * (0.5 * vol[b_owner] / amag)[:, None]
    return Mesh(cent, vol, owner, nb, area, fc, b_owner, b_area, b_fc,
                np.array(b_patch, dtype=int), patches)
