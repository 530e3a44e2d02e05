"""
Problem description: mean-flow fields, boundary conditions, flame model and
solver settings, plus JSON case-file loading and writing.

Case files are JSON documents with five sections::

    {
      "mesh":       {"type": "line", "length": 0.5, "n_cells": 200},
      "fields":     {"type": "uniform", "c": 450.0, "rho": 1.2, "gamma": 1.4},
      "boundaries": {"left": {"kind": "Reflecting"},
                     "right": {"kind": "ConstantImpedance", "Z": [0.0, 1.0]}},
      "flame":      null,
      "solver":     {"target_hz": 400.0, "nev": 4}
    }

See the README for the full schema. Frequencies in case files are in Hz and are
converted to rad/s on load.
"""
from __future__ import annotations

import copy
import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import CaseLoadError, InvalidArgument
from .mesh import Mesh, build_1d_mesh, build_block_mesh, read_mesh_csv, skew_mesh

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
CASE_DIR_ENV = "RESONARE_CASE_DIR"


class BoundaryKind(str, Enum):
    REFLECTING = "Reflecting"
    ZERO_PRESSURE = "ZeroPressure"
    CONSTANT_IMPEDANCE = "ConstantImpedance"
    GENERAL_IMPEDANCE = "GeneralImpedance"


class GradientOrder(str, Enum):
    FIRST = "First"
    SECOND = "Second"


@dataclass(frozen=True, eq=False)
class MeanFlowField:
    """Per-cell sound speed, density, heat-capacity ratio and normalized heat release."""

    c: np.ndarray
    rho: np.ndarray
    gamma: np.ndarray
    q_norm: np.ndarray

    def __post_init__(self):
        n = len(self.c)
        for name in ("c", "rho", "gamma", "q_norm"):
            arr = np.array(getattr(self, name), dtype=float, copy=True)
            if arr.shape != (n,):
                raise InvalidArgument(f"field {name!r} has shape {arr.shape}, expected ({n},)")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(~(self.c > 0)):
            raise InvalidArgument("sound speed must be positive everywhere")
        if np.any(~(self.rho > 0)):
            raise InvalidArgument("density must be positive everywhere")
        if np.any(~(self.gamma > 1)):
            raise InvalidArgument("gamma must exceed 1 everywhere")
        if np.any(self.q_norm < 0) or np.any(self.q_norm > 1):
            raise InvalidArgument("q_norm must lie in [0, 1]")
        if np.any(self.q_norm > 0) and self.q_norm.max() != 1.0:
            raise InvalidArgument("q_norm must peak at exactly 1")

    @property
    def n_cells(self) -> int:
        return len(self.c)

    def equals(self, other: "MeanFlowField", rtol: float = 0.0) -> bool:
        return all(np.allclose(getattr(self, k), getattr(other, k), rtol=rtol, atol=0.0)
                   for k in ("c", "rho", "gamma", "q_norm"))


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary condition on one patch.

    ``Z`` is the impedance of a ConstantImpedance patch. GeneralImpedance uses
    ``1/Z(w) = 1/Z0 + w Z1 + Z2/w``; ``Z0 = None`` drops the first term.
    """

    patch_id: int
    kind: BoundaryKind
    Z: complex | None = None
    Z0: complex | None = None
    Z1: complex = 0j
    Z2: complex = 0j

    def normalized(self) -> "BoundarySpec":
        """Map a zero constant impedance onto the equivalent ZeroPressure condition."""
        if self.kind is BoundaryKind.CONSTANT_IMPEDANCE and self.Z == 0:
            return BoundarySpec(self.patch_id, BoundaryKind.ZERO_PRESSURE)
        return self

    @property
    def is_impedance(self) -> bool:
        return self.kind in (BoundaryKind.CONSTANT_IMPEDANCE, BoundaryKind.GENERAL_IMPEDANCE)


@dataclass(frozen=True)
class FlameModel:
    """n-tau flame closure referenced to a single upstream velocity probe.

    ``dtd_terms`` holds ``(eta_i, tau_i)`` pairs and, when nonempty, replaces
    the single ``(eta, tau)`` pair.
    """

    eta: float
    tau: float
    ref_cell: int
    ref_dir: tuple
    rho_ref: float
    Q_tot: float
    U_bulk: float
    dtd_terms: tuple = ()
    ref_point: tuple | None = None

    def __post_init__(self):
        d = np.asarray(self.ref_dir, dtype=float)
        if d.shape != (3,) or abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise InvalidArgument(f"ref_dir must be a unit 3-vector, got {self.ref_dir}")
        if self.tau < 0 or any(t < 0 for _, t in self.dtd_terms):
            raise InvalidArgument("time lags must be non-negative")
        if not self.U_bulk > 0:
            raise InvalidArgument("U_bulk must be positive")
        if not self.Q_tot > 0:
            raise InvalidArgument("Q_tot must be positive")
        if not self.rho_ref > 0:
            raise InvalidArgument("rho_ref must be positive")

    @property
    def terms(self) -> tuple:
        """The ``(eta_i, tau_i)`` pairs defining the delayed source."""
        if self.dtd_terms:
            return tuple((float(e), float(t)) for e, t in self.dtd_terms)
        return ((float(self.eta), float(self.tau)),)


@dataclass(frozen=True)
class SolverConfig:
    """Eigensolver settings. All frequencies here are angular, in rad/s.

    ``region`` is ``(re_min, re_max, im_min, im_max)`` in the complex w-plane.
    """

    target: complex = 0j
    nev: int = 4
    ncv: int | None = None
    tol: float = 1e-8
    restart_fraction: float = 0.5
    nleigs_degree_max: int = 60
    region: tuple | None = None
    gradient_order: GradientOrder = GradientOrder.SECOND
    omega_min: float = 1.0
    max_restarts: int = 200

    def __post_init__(self):
        object.__setattr__(self, "target", complex(self.target))
        object.__setattr__(self, "gradient_order", GradientOrder(self.gradient_order))
        if self.ncv is None:
            object.__setattr__(self, "ncv", max(20, 4 * self.nev))
        if self.region is not None:
            object.__setattr__(self, "region", tuple(float(v) for v in self.region))
        if self.nev < 1:
            raise InvalidArgument("nev must be >= 1")
        if self.ncv < 2 * self.nev:
            raise InvalidArgument("ncv must be >= 2*nev")
        if not 0 < self.restart_fraction < 1:
            raise InvalidArgument("restart_fraction must lie in (0, 1)")
        if not self.tol > 0:
            raise InvalidArgument("tol must be positive")
        if self.region is not None:
            r = self.region
            if len(r) != 4 or not (r[0] < r[1] and r[2] < r[3]):
                raise InvalidArgument(f"region must be (re_min, re_max, im_min, im_max) with min < max, got {r}")

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class Case:
    mesh: Mesh
    fields: MeanFlowField
    boundaries: tuple
    flame: FlameModel | None
    solver: SolverConfig
    mesh_spec: dict | None = None
    fields_spec: dict | None = None
    source_dir: str | None = field(default=None, compare=False)

    def boundary_for(self, patch_id: int) -> BoundarySpec:
        for b in self.boundaries:
            if b.patch_id == patch_id:
                return b
        raise KeyError(patch_id)

    def equals(self, other: "Case", rtol: float = 1e-15) -> bool:
        """Field-by-field comparison, exact for discrete data and ``rtol`` for reals."""
        m1, m2 = self.mesh, other.mesh
        if m1.n_cells != m2.n_cells or m1.patches != m2.patches:
            return False
        for k in ("face_owner", "face_neighbor", "bface_owner", "bface_patch"):
            if not np.array_equal(getattr(m1, k), getattr(m2, k)):
                return False
        for k in ("cell_centroids", "cell_volumes", "face_area", "bface_area"):
            if not np.allclose(getattr(m1, k), getattr(m2, k), rtol=rtol, atol=0.0):
                return False
        if not self.fields.equals(other.fields, rtol):
            return False
        if self.boundaries != other.boundaries or self.flame != other.flame:
            return False
        s1, s2 = self.solver, other.solver
        for k in ("nev", "ncv", "nleigs_degree_max", "gradient_order", "max_restarts"):
            if getattr(s1, k) != getattr(s2, k):
                return False
        reals = [(s1.target, s2.target), (s1.tol, s2.tol), (s1.restart_fraction, s2.restart_fraction),
                 (s1.omega_min, s2.omega_min)]
        if (s1.region is None) != (s2.region is None):
            return False
        if s1.region is not None:
            reals += list(zip(s1.region, s2.region))
        return all(abs(a - b) <= rtol * max(abs(a), abs(b)) for a, b in reals)


# ---------------------------------------------------------------------------
# field builders

def uniform_fields(mesh: Mesh, c: float, rho: float, gamma: float) -> MeanFlowField:
    """Constant mean flow with no heat release."""
    if not (c > 0 and rho > 0):
        raise InvalidArgument("sound speed and density must be positive")
    if not gamma > 1:
        raise InvalidArgument("gamma must exceed 1")
    n = mesh.n_cells
    return MeanFlowField(np.full(n, float(c)), np.full(n, float(rho)),
                         np.full(n, float(gamma)), np.zeros(n))


def two_zone_fields(mesh: Mesh, x_flame: float, thickness: float, c_cold: float, c_hot: float,
                    rho_cold: float, rho_hot: float, gamma: float) -> MeanFlowField:
    """Cold and hot zones joined by a tanh front at ``x_flame``.

    ``c`` and ``rho`` blend as ``cold + (hot - cold)(1 + tanh(2(x - x_flame)/thickness))/2``.
    The heat-release shape is a Gaussian ``exp(-(2(x - x_flame)/thickness)^2)``
    normalized so its cell maximum is exactly 1, with values below 1e-12
    truncated to zero to keep the source compact.
    """
    x = mesh.cell_centroids[:, 0]
    lo = min(x.min(), mesh.bface_centroid[:, 0].min()) if mesh.n_bfaces else x.min()
    hi = max(x.max(), mesh.bface_centroid[:, 0].max()) if mesh.n_bfaces else x.max()
    if not lo <= x_flame <= hi:
        raise InvalidArgument(f"x_flame={x_flame} lies outside the domain [{lo}, {hi}]")
    if not thickness > 0:
        raise InvalidArgument("thickness must be positive")
    if not gamma > 1:
        raise InvalidArgument("gamma must exceed 1")
    xi = (x - x_flame) / (0.5 * thickness)
    blend = 0.5 * (1.0 + np.tanh(xi))
    c = c_cold + (c_hot - c_cold) * blend
    rho = rho_cold + (rho_hot - rho_cold) * blend
    q = np.exp(-xi ** 2)
    q = q / q.max()
    q[q < 1e-12] = 0.0
    q[np.argmax(q)] = 1.0
    return MeanFlowField(c, rho, np.full(len(x), float(gamma)), q)


# ---------------------------------------------------------------------------
# JSON (de)serialization

def _complex(value, key):
    if value is None:
        return None
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, dict) and set(value) <= {"re", "im"}:
        return complex(float(value.get("re", 0.0)), float(value.get("im", 0.0)))
    raise CaseLoadError(key, f"expected a number or [re, im], got {value!r}")


def _complex_json(z):
    return None if z is None else [z.real, z.imag]


def _resolve(path, base_dir):
    if os.path.isabs(path):
        return path
    root = os.environ.get(CASE_DIR_ENV) or base_dir or os.getcwd()
    return os.path.join(root, path)


def build_mesh_from_spec(spec: dict, base_dir=None) -> Mesh:
    """Build a mesh from the ``mesh`` section of a case file."""
    kind = spec.get("type")
    try:
        if kind == "line":
            mesh = build_1d_mesh(spec["length"], spec["n_cells"])
        elif kind == "blocks":
            mesh = build_block_mesh(spec["blocks"])
        elif kind == "csv":
            mesh = read_mesh_csv(_resolve(spec["path"], base_dir))
        else:
            raise CaseLoadError("mesh.type", f"unknown mesh type {kind!r}")
    except KeyError as exc:
        raise CaseLoadError(f"mesh.{exc.args[0]}", "missing field") from None
    skew = spec.get("skew")
    if skew:
        mesh = skew_mesh(mesh, float(skew["amplitude"]), int(skew.get("seed", 0)))
    return mesh


def _fields_from_spec(spec, mesh):
    kind = spec.get("type")
    try:
        if kind == "uniform":
            return uniform_fields(mesh, spec["c"], spec["rho"], spec.get("gamma", 1.4))
        if kind == "two_zone":
            return two_zone_fields(mesh, spec["x_flame"], spec["thickness"], spec["c_cold"],
                                   spec["c_hot"], spec["rho_cold"], spec["rho_hot"],
                                   spec.get("gamma", 1.4))
        if kind == "inline":
            n = mesh.n_cells
            gamma = spec.get("gamma", 1.4)
            gamma = np.full(n, gamma) if np.isscalar(gamma) else np.asarray(gamma, dtype=float)
            q = spec.get("q_norm")
            q = np.zeros(n) if q is None else np.asarray(q, dtype=float)
            return MeanFlowField(np.asarray(spec["c"], dtype=float),
                                 np.asarray(spec["rho"], dtype=float), gamma, q)
    except KeyError as exc:
        raise CaseLoadError(f"fields.{exc.args[0]}", "missing field") from None
    except InvalidArgument as exc:
        raise CaseLoadError("fields", str(exc)) from None
    raise CaseLoadError("fields.type", f"unknown fields type {kind!r}")


def _boundary_from_json(patch_id, entry, key):
    if not isinstance(entry, dict) or "kind" not in entry:
        raise CaseLoadError(key, "boundary entry needs a 'kind'")
    try:
        kind = BoundaryKind(entry["kind"])
    except ValueError:
        raise CaseLoadError(f"{key}.kind", f"unknown boundary kind {entry['kind']!r}") from None
    if kind is BoundaryKind.CONSTANT_IMPEDANCE:
        if "Z" not in entry:
            raise CaseLoadError(f"{key}.Z", "missing impedance")
        spec = BoundarySpec(patch_id, kind, Z=_complex(entry["Z"], f"{key}.Z"))
    elif kind is BoundaryKind.GENERAL_IMPEDANCE:
        spec = BoundarySpec(patch_id, kind, Z0=_complex(entry.get("Z0"), f"{key}.Z0"),
                            Z1=_complex(entry.get("Z1", 0.0), f"{key}.Z1"),
                            Z2=_complex(entry.get("Z2", 0.0), f"{key}.Z2"))
    else:
        spec = BoundarySpec(patch_id, kind)
    return spec.normalized()


def _boundary_json(b):
    out = {"kind": b.kind.value}
    if b.kind is BoundaryKind.CONSTANT_IMPEDANCE:
        out["Z"] = _complex_json(b.Z)
    elif b.kind is BoundaryKind.GENERAL_IMPEDANCE:
        out.update(Z0=_complex_json(b.Z0), Z1=_complex_json(b.Z1), Z2=_complex_json(b.Z2))
    return out


def _solver_from_json(sec):
    known = {"target_hz", "nev", "ncv", "tol", "restart_fraction", "nleigs_degree_max",
             "region_hz", "gradient_order", "omega_min", "max_restarts"}
    unknown = set(sec) - known
    if unknown:
        raise CaseLoadError(f"solver.{sorted(unknown)[0]}", "unknown solver setting")
    kw = {}
    if "target_hz" in sec:
        kw["target"] = TWO_PI * _complex(sec["target_hz"], "solver.target_hz")
    for k in ("nev", "ncv", "nleigs_degree_max", "max_restarts"):
        if k in sec and sec[k] is not None:
            kw[k] = int(sec[k])
    for k in ("tol", "restart_fraction", "omega_min"):
        if k in sec:
            kw[k] = float(sec[k])
    if sec.get("region_hz") is not None:
        kw["region"] = tuple(TWO_PI * float(v) for v in sec["region_hz"])
    if "gradient_order" in sec:
        try:
            kw["gradient_order"] = GradientOrder(sec["gradient_order"])
        except ValueError:
            raise CaseLoadError("solver.gradient_order", f"expected First or Second, got {sec['gradient_order']!r}") from None
    try:
        return SolverConfig(**kw)
    except InvalidArgument as exc:
        raise CaseLoadError("solver", str(exc)) from None


def _solver_json(s: SolverConfig):
    out = {
        "target_hz": _complex_json(s.target / TWO_PI),
        "nev": s.nev, "ncv": s.ncv, "tol": s.tol,
        "restart_fraction": s.restart_fraction,
        "nleigs_degree_max": s.nleigs_degree_max,
        "gradient_order": s.gradient_order.value,
        "omega_min": s.omega_min,
        "max_restarts": s.max_restarts,
    }
    if s.region is not None:
        out["region_hz"] = [v / TWO_PI for v in s.region]
    return out


def _flame_from_json(sec, mesh, fields):
    try:
        point = tuple(float(v) for v in sec["ref_point"])
        if len(point) != 3:
            raise CaseLoadError("flame.ref_point", "expected 3 coordinates")
        ref_cell = mesh.locate(point)
        log.info("flame reference point %s snapped to cell %d at %s", point, ref_cell,
                 tuple(mesh.cell_centroids[ref_cell]))
        d = np.asarray(sec.get("ref_dir", [1.0, 0.0, 0.0]), dtype=float)
        if not np.linalg.norm(d) > 0:
            raise CaseLoadError("flame.ref_dir", "zero direction")
        d = d / np.linalg.norm(d)
        rho_ref = float(sec["rho_ref"]) if sec.get("rho_ref") is not None else float(fields.rho[ref_cell])
        terms = tuple((float(e), float(t)) for e, t in sec.get("dtd_terms") or ())
        return FlameModel(eta=float(sec.get("eta", 0.0)), tau=float(sec.get("tau", 0.0)),
                          ref_cell=ref_cell, ref_dir=tuple(d), rho_ref=rho_ref,
                          Q_tot=float(sec["Q_tot"]), U_bulk=float(sec["U_bulk"]),
                          dtd_terms=terms, ref_point=point)
    except KeyError as exc:
        raise CaseLoadError(f"flame.{exc.args[0]}", "missing field") from None
    except InvalidArgument as exc:
        raise CaseLoadError("flame", str(exc)) from None


def _flame_json(f: FlameModel, mesh):
    point = f.ref_point if f.ref_point is not None else tuple(mesh.cell_centroids[f.ref_cell])
    return {"eta": f.eta, "tau": f.tau, "ref_point": [float(v) for v in point],
            "ref_dir": [float(v) for v in f.ref_dir], "rho_ref": f.rho_ref,
            "Q_tot": f.Q_tot, "U_bulk": f.U_bulk,
            "dtd_terms": [[e, t] for e, t in f.dtd_terms]}


def case_from_dict(doc: dict, base_dir=None) -> Case:
    """Build a :class:`Case` from a parsed case document."""
    for key in ("mesh", "fields", "boundaries"):
        if key not in doc:
            raise CaseLoadError(key, "missing section")
    mesh_spec = copy.deepcopy(doc["mesh"])
    mesh = build_mesh_from_spec(mesh_spec, base_dir)
    fields_spec = copy.deepcopy(doc["fields"])
    fields = _fields_from_spec(fields_spec, mesh)
    if fields_spec.get("type") == "inline":
        fields_spec = None

    entries = dict(doc["boundaries"])
    default = entries.pop("default", None)
    names = set(mesh.patch_names)
    for name in entries:
        if name not in names:
            raise CaseLoadError(f"boundaries.{name}", f"unknown patch; mesh has {sorted(names)}")
    boundaries = []
    for p in mesh.patches:
        entry = entries.get(p.name, default)
        if entry is None:
            raise CaseLoadError(f"boundaries.{p.name}", "patch has no boundary condition")
        boundaries.append(_boundary_from_json(p.patch_id, entry, f"boundaries.{p.name}"))

    flame = None
    if doc.get("flame"):
        flame = _flame_from_json(doc["flame"], mesh, fields)
    solver = _solver_from_json(doc.get("solver") or {})
    return Case(mesh, fields, tuple(boundaries), flame, solver, mesh_spec, fields_spec, base_dir)


def load_case(path) -> Case:
    """Load and validate a JSON case file.

    A relative ``path`` that does not exist is looked up under
    ``$RESONARE_CASE_DIR``. Relative paths inside the file resolve against
    ``$RESONARE_CASE_DIR`` when set, otherwise against the directory holding
    the case file.
    """
    path = os.fspath(path)
    if not os.path.isabs(path) and not os.path.exists(path) and os.environ.get(CASE_DIR_ENV):
        path = os.path.join(os.environ[CASE_DIR_ENV], path)
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise CaseLoadError("path", f"case file {path!r} not found") from None
    except json.JSONDecodeError as exc:
        raise CaseLoadError("json", str(exc)) from None
    return case_from_dict(doc, os.path.dirname(os.path.abspath(path)))


def case_to_dict(case: Case) -> dict:
    if case.mesh_spec is None:
        raise InvalidArgument("case has no mesh description to serialize; "
                              "export the mesh with write_mesh_csv and set mesh_spec")
    if case.fields_spec is not None:
        fields = copy.deepcopy(case.fields_spec)
    else:
        f = case.fields
        fields = {"type": "inline", "c": f.c.tolist(), "rho": f.rho.tolist(),
                  "gamma": f.gamma.tolist(), "q_norm": f.q_norm.tolist()}
    names = {p.patch_id: p.name for p in case.mesh.patches}
    return {
        "mesh": copy.deepcopy(case.mesh_spec),
        "fields": fields,
        "boundaries": {names[b.patch_id]: _boundary_json(b) for b in case.boundaries},
        "flame": None if case.flame is None else _flame_json(case.flame, case.mesh),
        "solver": _solver_json(case.solver),
    }


def write_case(case: Case, path) -> None:
    with open(path, "w") as fh:
        json.dump(case_to_dict(case), fh, indent=2)
        fh.write("\n")


def make_case(mesh_spec: dict, fields_spec: dict, boundaries: dict, flame: dict | None = None,
              solver: dict | None = None, base_dir=None) -> Case:
    """Convenience wrapper around :func:`case_from_dict` for programmatic cases."""
    return case_from_dict({"mesh": mesh_spec, "fields": fields_spec, "boundaries": boundaries,
                           "flame": flame, "solver": solver or {}}, base_dir)


def with_boundary(case: Case, patch: str, entry: dict) -> Case:
    """Copy of ``case`` with the condition on ``patch`` replaced."""
    pid = case.mesh.patch(patch).patch_id
    new = _boundary_from_json(pid, entry, f"boundaries.{patch}")
    return replace(case, boundaries=tuple(new if b.patch_id == pid else b for b in case.boundaries))


# ---------------------------------------------------------------------------
# reference configurations

def duct_case(length=0.5, n_cells=200, c=450.0, rho=1.2, right="Reflecting", nev=4,
              target_hz=0.0) -> Case:
    """Uniform 1D duct, closed at the left end."""
    return make_case({"type": "line", "length": length, "n_cells": n_cells},
                     {"type": "uniform", "c": c, "rho": rho, "gamma": 1.4},
                     {"left": {"kind": "Reflecting"}, "right": {"kind": right}},
                     solver={"nev": nev, "target_hz": target_hz})


def resonator_case(h=0.01 / 3, c=347.73, rho=1.174, nev=8, target_hz=0.0) -> Case:
    """Cavity with a cubic neck centered on its +x face, open at the neck end.

    The cavity is 0.1 x 0.08 x 0.08 m and the neck a 0.02 m cube; ``h`` is the
    target cell size (it must divide 0.02 m into whole cells).
    """
    n_neck = int(round(0.02 / h))
    if abs(n_neck * h - 0.02) > 1e-9:
        raise InvalidArgument(f"cell size {h} does not divide the 0.02 m neck")
    blocks = [
        {"origin": [0.0, 0.0, 0.0], "extents": [0.1, 0.08, 0.08],
         "cell_counts": [5 * n_neck, 4 * n_neck, 4 * n_neck], "name": "cavity"},
        {"origin": [0.1, 0.03, 0.03], "extents": [0.02, 0.02, 0.02],
         "cell_counts": [n_neck, n_neck, n_neck], "name": "neck"},
    ]
    return make_case({"type": "blocks", "blocks": blocks},
                     {"type": "uniform", "c": c, "rho": rho, "gamma": 1.4},
                     {"neck_xmax": {"kind": "ZeroPressure"}, "default": {"kind": "Reflecting"}},
                     solver={"nev": nev, "target_hz": target_hz})


def cavity_case(Z=1j, length=0.5, height=0.1, nx=50, ny=10, c0=450.0, rho=1.2, nev=3,
                target_hz=None, skew=None) -> Case:
    """2D rectangular cavity, hard walls except the impedance at x = length.

    ``target_hz`` defaults to a point just below the lowest hard-wall mode so
    that the first ``nev`` modes are the ones nearest the shift.
    """
    Z = complex(Z)
    right = {"kind": "ConstantImpedance", "Z": [Z.real, Z.imag]}
    mesh = {"type": "blocks", "blocks": [{"origin": [0.0, 0.0], "extents": [length, height],
                                          "cell_counts": [nx, ny]}]}
    if skew:
        mesh["skew"] = {"amplitude": skew[0], "seed": skew[1]}
    if target_hz is None:
        target_hz = c0 / (2 * length)
    return make_case(mesh, {"type": "uniform", "c": c0, "rho": rho, "gamma": 1.4},
                     {"xmax": right, "default": {"kind": "Reflecting"}},
                     solver={"nev": nev, "target_hz": target_hz})


def calibrated_heat_release(fields: MeanFlowField, mesh: Mesh, rho_ref: float, U_bulk: float,
                            temperature_ratio: float, fraction: float = 1.0) -> float:
    """``Q_tot`` for which the source integrates like a thin flame.

    With ``Q_tot = fraction rho_ref U_bulk c_cold^2 (T_hot/T_cold - 1) / ((gamma - 1) int q dV)``
    the volume integral of ``s`` equals ``fraction c_cold^2 (T_hot/T_cold - 1)``;
    ``fraction = 1`` is the heat-release strength of a compact flame with that
    temperature jump.
    """
    weight = float(np.sum(fields.q_norm * mesh.cell_volumes))
    if weight <= 0:
        raise InvalidArgument("heat-release shape is zero everywhere")
    hot = fields.q_norm > 0
    gamma = float(np.mean(fields.gamma[hot]))
    c_cold = float(fields.c.min())
    return fraction * rho_ref * U_bulk * c_cold ** 2 * (temperature_ratio - 1.0) / ((gamma - 1.0) * weight)


def flame_duct_case(n_cells=1000, length=0.5, x_flame=0.25, thickness=0.025, c_cold=347.0,
                    c_hot=694.0, rho_cold=1.17, rho_hot=0.585, gamma=1.4, eta=5.0, tau=1e-4,
                    x_ref=None, U_bulk=1.0, heat_release_fraction=0.02,
                    region_hz=(50.0, 1800.0, -20.0, 20.0), nev=4, dtd_terms=()) -> Case:
    """1D duct with a planar flame: closed inlet, open outlet, cold upstream gas.

    The reference probe sits just upstream of the flame center unless ``x_ref``
    is given, and ``Q_tot`` follows :func:`calibrated_heat_release` with the
    temperature ratio ``(c_hot/c_cold)^2``. With the default
    ``heat_release_fraction`` and ``eta = 5`` the first four modes have growth
    rates between about 0.1 and 50 rad/s.
    """
    mesh_spec = {"type": "line", "length": length, "n_cells": n_cells}
    fields_spec = {"type": "two_zone", "x_flame": x_flame, "thickness": thickness,
                   "c_cold": c_cold, "c_hot": c_hot, "rho_cold": rho_cold,
                   "rho_hot": rho_hot, "gamma": gamma}
    mesh = build_mesh_from_spec(mesh_spec)
    fields = _fields_from_spec(fields_spec, mesh)
    q_tot = calibrated_heat_release(fields, mesh, rho_cold, U_bulk, (c_hot / c_cold) ** 2,
                                    heat_release_fraction)
    x_ref = x_flame - 0.2 * length / n_cells if x_ref is None else x_ref
    flame = {"eta": eta, "tau": tau, "ref_point": [x_ref, 0.0, 0.0], "ref_dir": [1.0, 0.0, 0.0],
             "rho_ref": rho_cold, "Q_tot": q_tot, "U_bulk": U_bulk,
             "dtd_terms": [list(t) for t in dtd_terms]}
    solver = {"nev": nev, "region_hz": list(region_hz),
              "target_hz": 0.5 * (region_hz[0] + region_hz[1])}
    return make_case(mesh_spec, fields_spec,
                     {"left": {"kind": "Reflecting"}, "right": {"kind": "ZeroPressure"}},
                     flame, solver)


def close_modes_case(n_cells=48, eta=20.0, taus=(1e-3, 6e-3), target_hz=300.0,
                     region_hz=(50.0, 800.0, -30.0, 30.0), nev=2) -> Case:
    """Two-delay flame whose nonlinear modes crowd around the first cold mode.

    With these defaults the roots near 163, 289 and 420 Hz surround the cold
    mode at 276 Hz, and a fixed-point iteration started from the cold mode
    keeps jumping between their basins.
    """
    c = flame_duct_case(n_cells=n_cells, dtd_terms=tuple((eta, t) for t in taus),
                        region_hz=region_hz, nev=nev)
    return replace(c, solver=c.solver.with_(target=TWO_PI * target_hz))
