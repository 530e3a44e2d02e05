"""
Command-line driver.

    resonare run   CASE [--solver S ...] [--out DIR] ...
    resonare sweep CASE --param {Zb,Za,eta,tau} --values V [V ...] [--out DIR] ...
    resonare perf  CASE --sizes N [N ...] [--out DIR]

``run`` writes ``modes.csv``, one ``mode_<k>.csv`` per mode and ``report.md``.
When a solve fails, whatever was computed is still written, with a
``.partial`` suffix, and the exit code is nonzero.
"""
from __future__ import annotations

import argparse
import copy
import csv
import dataclasses
import logging
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .assembly import assemble, dump_matrices
from .case import TWO_PI, Case, load_case, make_case, with_boundary
from .eigen import METHODS, default_method, solve
from .errors import NoConvergenceError, OracleError, ResonareError
from .linalg import lu_factor
from .oracle import cavity_modes

log = logging.getLogger("resonare")

EXIT_OK = 0
EXIT_SOLVE_FAILED = 1
EXIT_BAD_INPUT = 2

MODES_HEADER = ["mode", "f_r_hz", "omega_i_rad_s", "residual", "stability"]
SHAPE_HEADER = ["cell", "abs_p", "re_p", "im_p"]
SWEEP_HEADER = ["value", "mode", "f_r_hz", "omega_i_rad_s", "analytic_f_r_hz",
                "analytic_f_i_hz", "rel_error", "status"]
PERF_HEADER = ["n_cells", "assemble_s", "factor_s", "solve_s", "peak_memory_mb"]
SINGULAR_POINTS = {"Zb": (0.0,), "Za": (-1.0, 0.0, 1.0)}
SINGULAR_GAP = 1e-3


# ---------------------------------------------------------------------------
# formatting

def _fmt_f(omega: complex) -> str:
    return f"{omega.real / TWO_PI:.1f}"


def _fmt_g(omega: complex) -> str:
    return f"{omega.imag:.2f}"


def _mode_rows(modes):
    return [[k + 1, _fmt_f(m.omega), _fmt_g(m.omega), f"{m.residual:.2e}", m.stability.value]
            for k, m in enumerate(modes)]


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_shape(path, shape):
    rows = [[i, f"{abs(v):.10e}", f"{v.real:.10e}", f"{v.imag:.10e}"] for i, v in enumerate(shape)]
    _write_csv(path, SHAPE_HEADER, rows)


def _markdown_table(header, rows) -> str:
    out = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    out += ["| " + " | ".join(str(v) for v in r) + " |" for r in rows]
    return "\n".join(out)


# ---------------------------------------------------------------------------
# overrides

def _apply_overrides(case: Case, args) -> Case:
    changes = {}
    if args.nev is not None:
        changes["nev"] = args.nev
        changes["ncv"] = max(20, 4 * args.nev)
    if args.target_hz is not None:
        changes["target"] = TWO_PI * args.target_hz
    if args.region_hz is not None:
        changes["region"] = tuple(TWO_PI * v for v in args.region_hz)
    if args.tol is not None:
        changes["tol"] = args.tol
    if not changes:
        return case
    return dataclasses.replace(case, solver=case.solver.with_(**changes))


def _case_summary(case: Case, problem) -> list:
    mesh = case.mesh
    kinds = {p.name: case.boundary_for(p.patch_id).kind.value for p in mesh.patches}
    lines = [f"- cells: {mesh.n_cells}, interior faces: {mesh.n_faces}, boundary faces: {mesh.n_bfaces}",
             f"- problem class: {problem.kind.value}",
             "- boundaries: " + ", ".join(f"{k}={v}" for k, v in sorted(kinds.items()))]
    if case.flame is not None:
        terms = ", ".join(f"(eta={e:g}, tau={t:g} s)" for e, t in case.flame.terms)
        lines.append(f"- flame: {terms}, reference cell {case.flame.ref_cell}")
    s = case.solver
    lines.append(f"- target: {s.target.real / TWO_PI:.1f} Hz, nev: {s.nev}, tol: {s.tol:g}")
    if s.region is not None:
        r = [v / TWO_PI for v in s.region]
        lines.append(f"- region: Re f in [{r[0]:g}, {r[1]:g}] Hz, Im f in [{r[2]:g}, {r[3]:g}] Hz")
    return lines


# ---------------------------------------------------------------------------
# run

def _solve_one(problem, config, method, seed):
    """``(modeset, error)``; ``modeset`` is the partial set on failure."""
    try:
        return solve(problem, config, method=method, seed=seed), None
    except NoConvergenceError as exc:
        return exc.partial, exc


def _side_by_side(results) -> str:
    names = [n for n, _, _ in results]
    ref = results[0][1]
    header = ["mode"] + [f"{n} f [Hz]" for n in names] + [f"{n} w_i [rad/s]" for n in names]
    rows = []
    for k, m in enumerate(ref.by_frequency() if ref else []):
        fs, gs = [], []
        for _, ms, _ in results:
            if ms is None or len(ms) == 0:
                fs.append("-")
                gs.append("-")
                continue
            near = min(ms, key=lambda x: abs(x.omega - m.omega))
            fs.append(_fmt_f(near.omega))
            gs.append(_fmt_g(near.omega))
        rows.append([k + 1] + fs + gs)
    return _markdown_table(header, rows)


def cmd_run(args) -> int:
    case = _apply_overrides(load_case(args.case), args)
    os.makedirs(args.out, exist_ok=True)
    problem = assemble(case, matrix_free=True if "matrix-free" in (args.solver or []) else None)
    methods = args.solver or ["auto"]
    methods = [default_method(problem.kind) if m == "auto" else m for m in methods]
    manifest = []
    if args.dump_matrices:
        mdir = os.path.join(args.out, "matrices")
        manifest += [os.path.relpath(p, args.out) for p in dump_matrices(problem, mdir)]

    results, timings, failed = [], [], False
    for method in methods:
        t0 = time.perf_counter()
        try:
            ms, err = _solve_one(problem, case.solver, method, args.seed)
        except (ResonareError, ValueError) as exc:
            ms, err = None, exc
        timings.append((method, time.perf_counter() - t0))
        results.append((method, ms, err))
        nonconv = ms is not None and any(not m.converged for m in ms)
        failed = failed or err is not None or nonconv

    suffix = ".partial" if any(err is not None for _, _, err in results) else ""
    primary = results[0][1]
    ordered = primary.by_frequency() if primary is not None else []
    name = "modes.csv" + suffix
    _write_csv(os.path.join(args.out, name), MODES_HEADER, _mode_rows(ordered))
    manifest.append(name)
    for k, m in enumerate(ordered):
        name = f"mode_{k + 1}.csv" + suffix
        _write_shape(os.path.join(args.out, name), m.shape)
        manifest.append(name)
    if len(results) > 1:
        for method, ms, err in results:
            name = f"modes_{method}.csv" + (".partial" if err is not None else "")
            _write_csv(os.path.join(args.out, name), MODES_HEADER,
                       _mode_rows(ms.by_frequency() if ms is not None else []))
            manifest.append(name)
    _write_csv(os.path.join(args.out, "timings.csv"), ["solver", "wall_s"],
               [[m, f"{t:.4f}"] for m, t in timings])
    manifest.append("timings.csv")

    lines = [f"# Modal analysis of {os.path.basename(args.case)}", "", "## Case", ""]
    lines += _case_summary(case, problem)
    for method, ms, err in results:
        lines += ["", f"## Solver: {method}", ""]
        if err is not None:
            lines += [f"**Failed:** {err}", ""]
        if ms is None:
            continue
        lines.append(_markdown_table(MODES_HEADER, _mode_rows(ms.by_frequency())))
        d = ms.diagnostics
        keys = ("path", "degree", "iterations", "restarts", "factorizations", "quadratic_solves",
                "nonconverged", "max_gmres_iterations")
        facts = [f"{k}={d[k]}" for k in keys if k in d]
        if facts:
            lines += ["", "Diagnostics: " + ", ".join(facts)]
        if method == "iterative":
            lines += ["", "Fixed-point histories (f [Hz], w_i [rad/s]):", ""]
            for k, m in enumerate(ms.by_frequency()):
                hist = " -> ".join(f"{_fmt_f(w)}/{_fmt_g(w)}" for w in m.history)
                flag = "" if m.converged else " (not converged)"
                lines.append(f"- mode {k + 1}{flag}: {hist}")
    if len(results) > 1:
        lines += ["", "## Side by side", "", _side_by_side(results)]
    manifest.append("report.md" + suffix)
    lines += ["", "## Files", ""] + [f"- {f}" for f in sorted(manifest)]
    with open(os.path.join(args.out, "report.md" + suffix), "w") as fh:
        fh.write("\n".join(lines) + "\n")

    for method, ms, err in results:
        if err is not None:
            print(f"{method}: {err}", file=sys.stderr)
    return EXIT_SOLVE_FAILED if failed else EXIT_OK


# ---------------------------------------------------------------------------
# sweep

def _impedance_patch(case: Case, name):
    if name:
        return name
    for p in case.mesh.patches:
        if case.boundary_for(p.patch_id).is_impedance:
            return p.name
    raise ResonareError("case has no impedance patch; pass --patch")


def _cavity_geometry(case: Case):
    """``(L, c0)`` when the cavity formula applies to ``case``, else ``None``."""
    spec = case.mesh_spec or {}
    if np.ptp(case.fields.c) > 0:
        return None
    if spec.get("type") == "line":
        L = float(spec["length"])
    elif spec.get("type") == "blocks" and len(spec["blocks"]) == 1:
        L = float(spec["blocks"][0]["extents"][0])
    else:
        return None
    return L, float(case.fields.c[0])


def _swept_case(case: Case, param, value, patch) -> Case:
    if param in ("Zb", "Za"):
        Z = complex(0.0, value) if param == "Zb" else complex(value, 0.0)
        return with_boundary(case, patch, {"kind": "ConstantImpedance", "Z": [Z.real, Z.imag]})
    if case.flame is None:
        raise ResonareError(f"parameter {param} needs a flame")
    if case.flame.dtd_terms:
        raise ResonareError(f"parameter {param} is ambiguous with distributed time delays")
    return dataclasses.replace(case, flame=dataclasses.replace(case.flame, **{param: value}))


def cmd_sweep(args) -> int:
    base = _apply_overrides(load_case(args.case), args)
    os.makedirs(args.out, exist_ok=True)
    patch = _impedance_patch(base, args.patch) if args.param in ("Zb", "Za") else None
    geom = _cavity_geometry(base) if args.param in ("Zb", "Za") else None
    rows, failed = [], False
    for value in args.values:
        if any(abs(value - s) < SINGULAR_GAP for s in SINGULAR_POINTS.get(args.param, ())):
            rows.append([f"{value:g}", "", "", "", "", "", "", "skipped"])
            continue
        try:
            case = _swept_case(base, args.param, value, patch)
            ms, err = _solve_one(assemble(case), case.solver, args.solver or "auto", args.seed)
        except (ResonareError, ValueError) as exc:
            ms, err = None, exc
        if err is not None:
            failed = True
        if ms is None or len(ms) == 0:
            rows.append([f"{value:g}", "", "", "", "", "", "", f"failed: {err}"])
            continue
        analytic = None
        if geom is not None:
            Z = complex(0.0, value) if args.param == "Zb" else complex(value, 0.0)
            try:
                analytic = cavity_modes(geom[0], geom[1], Z,
                                        m_values=range(0, case.solver.nev + 4)).frequencies
            except OracleError:
                analytic = None
        for k, m in enumerate(ms.by_frequency()):
            f = m.omega / TWO_PI
            status = "ok" if err is None else "partial"
            if analytic is not None:
                fa = analytic[np.argmin(np.abs(analytic - f))]
                rel = abs(f - fa) / abs(fa) if fa != 0 else abs(f - fa)
                extra = [f"{fa.real:.4f}", f"{fa.imag:.4f}", f"{rel:.3e}"]
            else:
                extra = ["", "", ""]
            rows.append([f"{value:g}", k + 1, f"{f.real:.4f}", f"{m.omega.imag:.4f}"] + extra + [status])
    _write_csv(os.path.join(args.out, "sweep.csv"), SWEEP_HEADER, rows)
    return EXIT_SOLVE_FAILED if failed else EXIT_OK


# ---------------------------------------------------------------------------
# perf

def _scaled_case(case: Case, n_cells: int) -> Case:
    spec = copy.deepcopy(case.mesh_spec)
    if spec is None:
        raise ResonareError("perf needs a case with a mesh description")
    if spec["type"] == "line":
        spec["n_cells"] = int(n_cells)
    elif spec["type"] == "blocks":
        counts = [b["cell_counts"] for b in spec["blocks"]]
        total = sum(int(np.prod(c)) for c in counts)
        dim = len(counts[0])
        factor = (n_cells / total) ** (1.0 / dim)
        for b in spec["blocks"]:
            b["cell_counts"] = [max(1, int(round(c * factor))) for c in b["cell_counts"]]
    else:
        raise ResonareError(f"perf cannot rescale a {spec['type']!r} mesh")
    doc = {"mesh": spec, "fields": case.fields_spec,
           "boundaries": {p.name: {"kind": case.boundary_for(p.patch_id).kind.value}
                          for p in case.mesh.patches},
           "solver": {"nev": case.solver.nev, "target_hz": case.solver.target.real / TWO_PI}}
    if case.fields_spec is None:
        raise ResonareError("perf needs fields given by a formula, not inline values")
    return make_case(doc["mesh"], doc["fields"], doc["boundaries"], None, doc["solver"], case.source_dir)


def _best_time(fn, repeats):
    best, out = math.inf, None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def perf_rows(case: Case, sizes, seed=None, solve_modes: bool = True):
    """Per-size ``(N, assemble, factor, solve, memory_mb)`` using sparse LU."""
    rows = []
    for n in sizes:
        c = _scaled_case(case, n)
        repeats = 3 if c.mesh.n_cells < 20000 else 1
        t_asm, problem = _best_time(lambda: assemble(c, matrix_free=False), repeats)
        sig2 = -(TWO_PI * 5.0) ** 2 if c.solver.target == 0 else c.solver.target ** 2
        M = problem.A + sig2 * problem.C
        t_fac, fac = _best_time(lambda: lu_factor(M, method="sparse"), repeats)
        t_sol = float("nan")
        if solve_modes:
            t0 = time.perf_counter()
            try:
                solve(problem, c.solver, seed=seed)
            except NoConvergenceError:
                pass
            t_sol = time.perf_counter() - t0
        mem = (fac.nnz + M.nnz + problem.A.nnz + problem.C.nnz) * 16 / 2 ** 20
        rows.append((c.mesh.n_cells, t_asm, t_fac, t_sol, mem))
    return rows


def loglog_slope(n, t) -> float:
    return float(np.polyfit(np.log(np.asarray(n, float)), np.log(np.asarray(t, float)), 1)[0])


def cmd_perf(args) -> int:
    case = load_case(args.case)
    os.makedirs(args.out, exist_ok=True)
    rows = perf_rows(case, args.sizes, args.seed, solve_modes=not args.no_solve)
    _write_csv(os.path.join(args.out, "perf.csv"), PERF_HEADER,
               [[n, f"{a:.6f}", f"{f:.6f}", f"{s:.6f}", f"{m:.3f}"] for n, a, f, s, m in rows])
    ns = [r[0] for r in rows]
    lines = ["# Scaling", "", _markdown_table(PERF_HEADER, [[r[0]] + [f"{v:.4g}" for v in r[1:]] for r in rows])]
    if len(rows) >= 2:
        lines += ["", f"- assembly slope: {loglog_slope(ns, [r[1] for r in rows]):.2f}",
                  f"- factorization slope: {loglog_slope(ns, [r[2] for r in rows]):.2f}"]
        if not args.no_solve:
            lines.append(f"- solve slope: {loglog_slope(ns, [r[3] for r in rows]):.2f}")
    with open(os.path.join(args.out, "perf.md"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines[3:]))
    return EXIT_OK


# ---------------------------------------------------------------------------

def _add_solver_flags(p, repeat_solver: bool):
    if repeat_solver:
        p.add_argument("--solver", action="append", choices=METHODS,
                       help="solution path; repeat to compare paths (default: auto)")
    else:
        p.add_argument("--solver", choices=METHODS, default=None)
    p.add_argument("--nev", type=int, help="number of modes")
    p.add_argument("--target-hz", type=float, help="shift, in Hz")
    p.add_argument("--region-hz", type=float, nargs=4, metavar=("FMIN", "FMAX", "GMIN", "GMAX"),
                   help="NLEIGS search rectangle; all four bounds in Hz")
    p.add_argument("--tol", type=float, help="residual tolerance")
    p.add_argument("--seed", type=int, default=None, help="random start vector seed")
    p.add_argument("--out", default=".", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="resonare", description="Thermoacoustic modal analysis")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="solve one case")
    p.add_argument("case")
    _add_solver_flags(p, True)
    p.add_argument("--dump-matrices", action="store_true", help="write A, B, C, s, g as Matrix Market")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="solve a case over a parameter range")
    p.add_argument("case")
    p.add_argument("--param", required=True, choices=("Zb", "Za", "eta", "tau"))
    p.add_argument("--values", required=True, type=float, nargs="+")
    p.add_argument("--patch", help="impedance patch for Zb/Za (default: first impedance patch)")
    _add_solver_flags(p, False)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("perf", help="time assembly, factorization and solve across mesh sizes")
    p.add_argument("case")
    p.add_argument("--sizes", required=True, type=int, nargs="+")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-solve", action="store_true", help="skip the eigensolve timing")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_perf)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ResonareError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
