import json
import logging

import numpy as np
import pytest

from resonare.assembly import ProblemKind, assemble
from resonare.case import (BoundaryKind, GradientOrder, MeanFlowField, SolverConfig, cavity_case,
                           close_modes_case, duct_case, flame_duct_case, load_case, make_case,
                           resonator_case, two_zone_fields, uniform_fields, write_case)
from resonare.errors import CaseLoadError, InvalidArgument
from resonare.mesh import build_1d_mesh


def _doc(**over):
    doc = {"mesh": {"type": "line", "length": 0.5, "n_cells": 10},
           "fields": {"type": "uniform", "c": 450.0, "rho": 1.2, "gamma": 1.4},
           "boundaries": {"left": {"kind": "Reflecting"}, "right": {"kind": "Reflecting"}},
           "solver": {"nev": 2}}
    doc.update(over)
    return doc


def _write(tmp_path, doc, name="case.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def test_uniform_fields_values():
    m = build_1d_mesh(1.0, 5)
    f = uniform_fields(m, 347.73, 1.174, 1.4)
    assert np.all(f.c == 347.73) and np.all(f.rho == 1.174) and np.all(f.q_norm == 0)
    f = uniform_fields(m, 1, 1, 1.4)
    assert np.all(f.c == 1)


@pytest.mark.parametrize("args", [(0, 1, 1.4), (1, -1, 1.4), (1, 1, 1.0)])
def test_uniform_fields_rejects(args):
    with pytest.raises(InvalidArgument):
        uniform_fields(build_1d_mesh(1.0, 3), *args)


def test_two_zone_monotone_and_peaked():
    m = build_1d_mesh(0.5, 200)
    f = two_zone_fields(m, 0.25, 0.025, 347, 694, 1.17, 0.585, 1.4)
    assert np.all(np.diff(f.c) >= 0)
    k = int(np.argmin(np.abs(m.cell_centroids[:, 0] - 0.25)))
    assert f.q_norm.max() == 1.0
    assert f.q_norm[k] == 1.0


def test_two_zone_wide_flame_covers_domain():
    m = build_1d_mesh(0.5, 100)
    f = two_zone_fields(m, 0.25, 0.5, 347, 694, 1.17, 0.585, 1.4)
    assert np.mean(f.q_norm > 0.5) > 0.5


def test_two_zone_degenerate_is_constant():
    m = build_1d_mesh(0.5, 50)
    f = two_zone_fields(m, 0.25, 0.05, 400, 400, 1.2, 1.2, 1.4)
    assert np.ptp(f.c) == 0


def test_two_zone_rejects_outside_flame():
    with pytest.raises(InvalidArgument):
        two_zone_fields(build_1d_mesh(0.5, 10), 0.7, 0.05, 347, 694, 1.17, 0.585, 1.4)


def test_field_invariants():
    with pytest.raises(InvalidArgument):
        MeanFlowField(np.ones(3), np.ones(3), np.full(3, 1.4), np.array([0.0, 0.5, 0.9]))
    with pytest.raises(InvalidArgument):
        MeanFlowField(np.ones(3), np.ones(3), np.full(3, 1.4), np.array([0.0, 1.5, 1.0]))


def test_solver_config_defaults_and_checks():
    s = SolverConfig(nev=8)
    assert (s.tol, s.ncv, s.restart_fraction, s.omega_min) == (1e-8, 32, 0.5, 1.0)
    assert s.gradient_order is GradientOrder.SECOND
    for bad in ({"nev": 0}, {"nev": 4, "ncv": 6}, {"restart_fraction": 1.0}, {"tol": 0.0},
                {"region": (1, 0, 0, 1)}):
        with pytest.raises(InvalidArgument):
            SolverConfig(**bad)


def test_resonator_case_loads_linear(tmp_path):
    case = resonator_case(h=0.01)
    write_case(case, tmp_path / "res.json")
    loaded = load_case(tmp_path / "res.json")
    assert loaded.flame is None
    assert np.all(loaded.fields.c == 347.73) and np.all(loaded.fields.rho == 1.174)
    kinds = {p.name: loaded.boundary_for(p.patch_id).kind for p in loaded.mesh.patches}
    assert kinds["neck_xmax"] is BoundaryKind.ZERO_PRESSURE
    assert sum(k is BoundaryKind.REFLECTING for k in kinds.values()) == len(kinds) - 1
    assert assemble(loaded).kind is ProblemKind.LINEAR


def test_cavity_case_is_quadratic():
    assert assemble(cavity_case(Z=1j, nx=10, ny=2)).kind is ProblemKind.QUADRATIC


def test_flame_case_is_nonlinear():
    assert assemble(flame_duct_case(n_cells=40)).kind is ProblemKind.NONLINEAR


def test_zero_impedance_becomes_zero_pressure(tmp_path):
    doc = _doc(boundaries={"left": {"kind": "Reflecting"},
                           "right": {"kind": "ConstantImpedance", "Z": [0.0, 0.0]}})
    case = load_case(_write(tmp_path, doc))
    assert case.boundary_for(case.mesh.patch("right").patch_id).kind is BoundaryKind.ZERO_PRESSURE


def test_unknown_patch_named_in_error(tmp_path):
    doc = _doc(boundaries={"left": {"kind": "Reflecting"}, "right": {"kind": "Reflecting"},
                           "top": {"kind": "Reflecting"}})
    with pytest.raises(CaseLoadError, match="boundaries.top"):
        load_case(_write(tmp_path, doc))


def test_missing_patch_condition(tmp_path):
    doc = _doc(boundaries={"left": {"kind": "Reflecting"}})
    with pytest.raises(CaseLoadError, match="boundaries.right"):
        load_case(_write(tmp_path, doc))


def test_missing_flame_field(tmp_path):
    doc = _doc(fields={"type": "two_zone", "x_flame": 0.25, "thickness": 0.05, "c_cold": 347,
                       "c_hot": 694, "rho_cold": 1.17, "rho_hot": 0.585, "gamma": 1.4},
               flame={"eta": 1.0, "tau": 1e-4, "ref_point": [0.2, 0, 0], "U_bulk": 1.0})
    with pytest.raises(CaseLoadError, match="flame.Q_tot"):
        load_case(_write(tmp_path, doc))


def test_invalid_solver_value(tmp_path):
    with pytest.raises(CaseLoadError, match="solver"):
        load_case(_write(tmp_path, _doc(solver={"nev": 0})))


def test_missing_file():
    with pytest.raises(CaseLoadError, match="path"):
        load_case("/nonexistent/case.json")


def test_ref_point_snap_is_logged(tmp_path, caplog):
    case = flame_duct_case(n_cells=50)
    write_case(case, tmp_path / "f.json")
    with caplog.at_level(logging.INFO, logger="resonare.case"):
        loaded = load_case(tmp_path / "f.json")
    assert "snapped to cell" in caplog.text
    assert loaded.flame.ref_cell == case.flame.ref_cell


def test_frequencies_converted_from_hz(tmp_path):
    doc = _doc(solver={"target_hz": 100.0, "region_hz": [10, 20, -1, 1]})
    case = load_case(_write(tmp_path, doc))
    assert np.isclose(case.solver.target, 2 * np.pi * 100)
    assert np.allclose(case.solver.region, 2 * np.pi * np.array([10, 20, -1, 1]))


def test_case_dir_env_resolves_csv_mesh(tmp_path, monkeypatch):
    from resonare.mesh import write_mesh_csv

    write_mesh_csv(build_1d_mesh(0.5, 8), tmp_path / "meshdir")
    doc = _doc(mesh={"type": "csv", "path": "meshdir"})
    other = tmp_path / "elsewhere"
    other.mkdir()
    p = _write(other, doc)
    monkeypatch.setenv("RESONARE_CASE_DIR", str(tmp_path))
    assert load_case(p).mesh.n_cells == 8


@pytest.mark.parametrize("factory", [
    lambda: duct_case(n_cells=20),
    lambda: cavity_case(Z=0.3 - 2j, nx=8, ny=2, skew=(0.1, 2)),
    lambda: flame_duct_case(n_cells=30),
    lambda: close_modes_case(n_cells=24),
    lambda: make_case({"type": "line", "length": 1.0, "n_cells": 6},
                      {"type": "inline", "c": [340.0 + i for i in range(6)], "rho": [1.2] * 6,
                       "gamma": [1.4] * 6, "q_norm": [0, 0.5, 1, 0.5, 0, 0]},
                      {"left": {"kind": "GeneralImpedance", "Z0": [2.0, 1.0], "Z1": [1e-4, 0],
                                "Z2": [0, 3.0]},
                       "right": {"kind": "ZeroPressure"}},
                      {"eta": 1.0, "tau": 2e-4, "ref_point": [0.2, 0, 0], "Q_tot": 10.0,
                       "U_bulk": 2.0, "dtd_terms": [[1.0, 1e-4], [0.5, 3e-4]]},
                      {"nev": 3, "target_hz": 200.0, "region_hz": [50, 500, -10, 10]}),
])
def test_write_load_round_trip(tmp_path, factory):
    case = factory()
    write_case(case, tmp_path / "c.json")
    assert load_case(tmp_path / "c.json").equals(case)
