import csv
import pathlib
import time

import pytest

from resonare.case import cavity_case, duct_case, resonator_case, write_case
from resonare.cli import (EXIT_BAD_INPUT, EXIT_OK, EXIT_SOLVE_FAILED, MODES_HEADER, PERF_HEADER,
                          SHAPE_HEADER, SWEEP_HEADER, loglog_slope, main)

CASES = pathlib.Path(__file__).resolve().parents[1] / "cases"


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def flame_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("flame")
    code = main(["run", str(CASES / "flame1d.json"), "--out", str(out)])
    return code, out


def test_golden_headers():
    assert MODES_HEADER == ["mode", "f_r_hz", "omega_i_rad_s", "residual", "stability"]
    assert SHAPE_HEADER == ["cell", "abs_p", "re_p", "im_p"]
    assert SWEEP_HEADER == ["value", "mode", "f_r_hz", "omega_i_rad_s", "analytic_f_r_hz",
                            "analytic_f_i_hz", "rel_error", "status"]
    assert PERF_HEADER == ["n_cells", "assemble_s", "factor_s", "solve_s", "peak_memory_mb"]


def test_flame_run_stability_column(flame_run):
    code, out = flame_run
    assert code == EXIT_OK
    rows = read_rows(out / "modes.csv")
    assert rows[0] == MODES_HEADER
    assert [r[4] for r in rows[1:]] == ["Stable", "Marginal", "Unstable", "Stable"]
    for k in range(1, 5):
        shape = read_rows(out / f"mode_{k}.csv")
        assert shape[0] == SHAPE_HEADER
        assert len(shape) == 1 + 1000
        assert max(float(r[1]) for r in shape[1:]) == pytest.approx(1.0)
    report = (out / "report.md").read_text()
    for name in ("modes.csv", "mode_1.csv", "timings.csv", "report.md"):
        assert f"- {name}" in report
        assert (out / name).exists()


def test_modes_csv_precision(flame_run):
    _, out = flame_run
    row = read_rows(out / "modes.csv")[1]
    assert len(row[1].split(".")[1]) == 1
    assert len(row[2].split(".")[1]) == 2
    assert "e" in row[3]


def test_modes_csv_byte_identical(tmp_path):
    case = tmp_path / "duct.json"
    write_case(duct_case(), case)
    assert main(["run", str(case), "--out", str(tmp_path / "a"), "--seed", "3"]) == EXIT_OK
    assert main(["run", str(case), "--out", str(tmp_path / "b"), "--seed", "3"]) == EXIT_OK
    for name in ("modes.csv", "mode_1.csv", "report.md"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_resonator_first_row(tmp_path):
    case = tmp_path / "res.json"
    write_case(resonator_case(h=0.01), case)
    assert main(["run", str(case), "--nev", "2", "--out", str(tmp_path)]) == EXIT_OK
    first = read_rows(tmp_path / "modes.csv")[1]
    assert float(first[1]) == pytest.approx(258, rel=0.10)
    assert first[4] == "Marginal"


def test_comparison_report(tmp_path):
    code = main(["run", str(CASES / "flame1d.json"), "--solver", "iterative", "--solver", "nleigs",
                 "--out", str(tmp_path)])
    assert code == EXIT_OK
    report = (tmp_path / "report.md").read_text()
    assert "## Side by side" in report
    assert "Fixed-point histories" in report
    assert "iterative f [Hz]" in report and "nleigs f [Hz]" in report
    assert (tmp_path / "modes_iterative.csv").exists()
    assert (tmp_path / "modes_nleigs.csv").exists()


def test_iterative_nonconvergence_exit_code(tmp_path):
    code = main(["run", str(CASES / "close_modes.json"), "--solver", "iterative", "--out", str(tmp_path)])
    assert code == EXIT_SOLVE_FAILED
    assert "(not converged)" in (tmp_path / "report.md").read_text()


def test_failed_solve_keeps_partial_outputs(tmp_path, capsys):
    case = tmp_path / "duct.json"
    write_case(duct_case(), case)
    code = main(["run", str(case), "--tol", "1e-30", "--out", str(tmp_path / "o")])
    assert code == EXIT_SOLVE_FAILED
    files = {p.name for p in (tmp_path / "o").iterdir()}
    assert "modes.csv.partial" in files and "report.md.partial" in files
    assert "modes.csv" not in files
    assert "linear" in capsys.readouterr().err


def test_bad_input_exit_code(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == EXIT_BAD_INPUT
    assert "error" in capsys.readouterr().err


def test_case_dir_environment(tmp_path, monkeypatch):
    write_case(duct_case(n_cells=50), tmp_path / "d.json")
    monkeypatch.setenv("RESONARE_CASE_DIR", str(tmp_path))
    assert main(["run", "d.json", "--out", str(tmp_path / "o")]) == EXIT_OK


def test_dump_matrices(tmp_path):
    write_case(cavity_case(nx=10, ny=2), tmp_path / "c.json")
    assert main(["run", str(tmp_path / "c.json"), "--dump-matrices", "--out", str(tmp_path / "o")]) == 0
    dumped = {p.name for p in (tmp_path / "o" / "matrices").iterdir()}
    assert {"A.mtx", "B.mtx", "C.mtx"} <= dumped


def test_zb_sweep_matches_reactive_formula(tmp_path):
    write_case(cavity_case(Z=1j, nx=100, ny=2), tmp_path / "c.json")
    code = main(["sweep", str(tmp_path / "c.json"), "--param", "Zb",
                 "--values", "-4", "-1", "0", "2", "4", "--out", str(tmp_path)])
    assert code == EXIT_OK
    rows = read_rows(tmp_path / "sweep.csv")
    assert rows[0] == SWEEP_HEADER
    skipped = [r for r in rows[1:] if r[-1] == "skipped"]
    assert [r[0] for r in skipped] == ["0"]
    errors = [float(r[6]) for r in rows[1:] if r[-1] == "ok"]
    assert len(errors) == 4 * 3
    assert max(errors) <= 0.01


def test_za_sweep_matches_resistive_formula(tmp_path):
    write_case(cavity_case(Z=3.0, nx=100, ny=2), tmp_path / "c.json")
    code = main(["sweep", str(tmp_path / "c.json"), "--param", "Za",
                 "--values", "-3", "-1", "0", "1", "3", "--out", str(tmp_path)])
    assert code == EXIT_OK
    rows = read_rows(tmp_path / "sweep.csv")[1:]
    assert sorted(r[0] for r in rows if r[-1] == "skipped") == ["-1", "0", "1"]
    for r in rows:
        if r[-1] != "ok":
            continue
        im_hz = float(r[3]) / (2 * 3.141592653589793)
        assert im_hz == pytest.approx(float(r[5]), rel=0.02)


def _growth_by_tau(path, mode):
    return {float(r[0]): float(r[3]) for r in read_rows(path)[1:] if r[1] == str(mode)}


def test_tau_sweep_flips_mode3_growth(tmp_path):
    code = main(["sweep", str(CASES / "flame1d.json"), "--param", "tau",
                 "--values", "0.5e-4", "1e-4", "2e-4", "5e-4", "--out", str(tmp_path)])
    assert code == EXIT_OK
    g = _growth_by_tau(tmp_path / "sweep.csv", 3)
    assert len(g) == 4
    assert min(g.values()) < 0 < max(g.values())


def test_tau_sweep_narrow_range_keeps_mode3_unstable(tmp_path):
    # the reconstructed flame puts the mode-3 sign change between 4e-4 and 5e-4 s
    main(["sweep", str(CASES / "flame1d.json"), "--param", "tau",
          "--values", "0.5e-4", "1e-4", "2e-4", "--out", str(tmp_path)])
    g = _growth_by_tau(tmp_path / "sweep.csv", 3)
    assert all(v > 0 for v in g.values())


def test_sweep_rejects_flame_param_without_flame(tmp_path):
    write_case(duct_case(n_cells=20), tmp_path / "d.json")
    code = main(["sweep", str(tmp_path / "d.json"), "--param", "eta", "--values", "1",
                 "--out", str(tmp_path)])
    assert code == EXIT_SOLVE_FAILED
    assert "failed" in read_rows(tmp_path / "sweep.csv")[1][-1]


def test_perf_small_case_is_fast(tmp_path):
    write_case(duct_case(), tmp_path / "d.json")
    t0 = time.perf_counter()
    assert main(["perf", str(tmp_path / "d.json"), "--sizes", "100", "--out", str(tmp_path)]) == EXIT_OK
    assert time.perf_counter() - t0 < 1.0
    rows = read_rows(tmp_path / "perf.csv")
    assert rows[0] == PERF_HEADER
    assert rows[1][0] == "100"


def test_loglog_slope():
    assert loglog_slope([10, 100, 1000], [1, 100, 10000]) == pytest.approx(2.0)


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "resonare" in capsys.readouterr().out
