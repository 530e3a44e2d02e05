import math
from dataclasses import replace

import numpy as np
import pytest
import scipy.sparse as sp

from resonare.assembly import AssembledProblem, ProblemKind, Rank1Source, assemble
from resonare.case import (MeanFlowField, SolverConfig, cavity_case, close_modes_case, duct_case,
                           flame_duct_case, with_boundary)
from resonare.eigen import (METHODS, Mode, ModeSet, SplitProblem, Stability, classify_stability,
                            default_method, residual, solve, solve_linear,
                            solve_nonlinear_iterative, solve_nonlinear_nleigs, solve_quadratic,
                            solve_with_matrix_free)
from resonare.eigen.modes import normalize_shape, principal_sqrt
from resonare.errors import InvalidArgument
from resonare.oracle import (dense_companion_oracle, dense_linear_oracle, dense_operator,
                             determinant_scan_oracle)

TWO_PI = 2 * math.pi


def true_residual(assembled, omega, p):
    """Residual from a dense ``F(w)`` built independently of the solvers."""
    F = dense_operator(assembled)(omega)
    n = assembled.norms
    scale = n["A"] + abs(omega) * n["B"] + abs(omega) ** 2 * n["C"]
    if assembled.S is not None:
        scale += sum(abs(e * np.exp(1j * omega * t)) for e, t in assembled.S.terms) * n["S"]
    return np.linalg.norm(F @ p) / (scale * np.linalg.norm(p))


def random_quadratic(seed, n=20):
    r = np.random.default_rng(seed)

    def M():
        return r.standard_normal((n, n)) + 1j * r.standard_normal((n, n))

    A, B, C = M(), M(), np.eye(n) + 0.1 * M()
    prob = AssembledProblem(sp.csr_matrix(A), sp.csr_matrix(B), sp.csr_matrix(C), None,
                            kind=ProblemKind.QUADRATIC)
    return prob, (A, B, C)


# ---------------------------------------------------------------------------
# modes


def test_stability_labels():
    assert classify_stability(1 + 0.6j) is Stability.UNSTABLE
    assert classify_stability(1 - 0.6j) is Stability.STABLE
    assert classify_stability(1 + 0.5j) is Stability.MARGINAL
    assert classify_stability(1 - 0.1j) is Stability.MARGINAL
    assert classify_stability(1 + 0.1j, band=0.05) is Stability.UNSTABLE


def test_normalize_shape_peak_is_real_one():
    p = np.array([0.1, -2j, 1 + 1j])
    q = normalize_shape(p)
    assert q[1] == 1.0
    assert np.max(np.abs(q)) == pytest.approx(1.0)
    np.testing.assert_allclose(q * p[1], p, rtol=1e-14)


@pytest.mark.parametrize("lam,expected", [(4.0, 2.0), (-4.0, 2j), (-4.0 - 0j, 2j), (3 - 4j, 2 - 1j)])
def test_principal_sqrt_branch(lam, expected):
    w = principal_sqrt(lam)
    assert w == pytest.approx(expected)
    assert w.real >= 0


def test_modeset_sorted_by_target_distance():
    ms = ModeSet([Mode(5.0, np.ones(2), 0.0), Mode(1.0, np.ones(2), 0.0), Mode(3.2, np.ones(2), 0.0)],
                 target=3.5)
    assert [m.omega.real for m in ms] == [3.2, 5.0, 1.0]
    assert [m.omega.real for m in ms.by_frequency()] == [1.0, 3.2, 5.0]
    assert ms[0].frequency_hz == pytest.approx(3.2 / TWO_PI)


# ---------------------------------------------------------------------------
# residual


def diagonal_problem():
    A = sp.diags([-1.0, -4.0, -9.0]).tocsr().astype(complex)
    C = sp.identity(3, format="csr", dtype=complex)
    return AssembledProblem(A, None, C, None)


def test_residual_of_exact_pair_is_zero():
    sp_ = SplitProblem(diagonal_problem())
    assert residual(sp_, 2.0, np.array([0, 1, 0])) < 1e-15


def test_residual_bands(duct_problem):
    case, prob = duct_problem
    ms = solve_linear(prob, case.solver)
    sp_ = SplitProblem(prob)
    m = ms[0]
    rng = np.random.default_rng(7)
    noise = rng.standard_normal(prob.N) + 1j * rng.standard_normal(prob.N)
    noisy = m.shape + 1e-6 * noise / np.linalg.norm(noise) * np.linalg.norm(m.shape)
    r_noisy = residual(sp_, m.omega, noisy)
    assert 1e-8 <= r_noisy <= 1e-4
    assert residual(sp_, m.omega, noise) > 1e-2


# ---------------------------------------------------------------------------
# linear path


def test_duct_linear_modes(duct_problem):
    case, prob = duct_problem
    ms = solve_linear(prob, case.solver)
    f = sorted(m.frequency_hz for m in ms)
    np.testing.assert_allclose(f, [450, 900, 1350, 1800], rtol=5e-3)
    for m in ms:
        assert abs(m.omega.imag) <= 1e-8 * abs(m.omega)
        assert true_residual(prob, m.omega, m.shape) <= case.solver.tol
        assert abs(m.omega) >= case.solver.omega_min
        assert np.max(np.abs(m.shape)) == pytest.approx(1.0)
    assert ms.diagnostics["orthogonality"] and max(ms.diagnostics["orthogonality"]) <= 1e-10


def test_linear_matches_dense_oracle_random_c():
    # 30 cells with a random sound-speed profile
    rng = np.random.default_rng(11)
    case = duct_case(n_cells=30, nev=5)
    n = case.mesh.n_cells
    fields = MeanFlowField(300 + 300 * rng.random(n), np.full(n, 1.2), np.full(n, 1.4), np.zeros(n))
    case = replace(case, fields=fields, solver=case.solver.with_(target=TWO_PI * 600))
    prob = assemble(case)
    ms = solve_linear(prob, case.solver)
    ref = dense_linear_oracle(prob.A.toarray(), prob.C.toarray(), squared=True)
    for m in ms:
        w2 = m.omega ** 2
        assert np.min(np.abs(ref - w2)) <= 1e-8 * abs(w2)


def test_linear_rejects_quadratic_problem(cavity_problem):
    case, prob = cavity_problem
    with pytest.raises(InvalidArgument):
        solve(prob, case.solver, method="linear")


def test_zero_target_drops_constant_mode(duct_problem):
    case, prob = duct_problem
    ms = solve_linear(prob, case.solver.with_(target=0j, nev=2))
    assert all(abs(m.omega) > case.solver.omega_min for m in ms)
    assert min(m.frequency_hz for m in ms) == pytest.approx(450, rel=5e-3)


def test_shift_consistency(duct_problem):
    case, prob = duct_problem
    a = solve_linear(prob, case.solver.with_(target=TWO_PI * 900, nev=4)).omegas
    b = solve_linear(prob, case.solver.with_(target=TWO_PI * 1300, nev=4)).omegas
    shared = [w for w in a if np.min(np.abs(b - w)) < 1e-3 * abs(w)]
    assert len(shared) >= 2
    for w in shared:
        assert np.min(np.abs(b - w)) <= 1e-9 * abs(w)


def test_start_vector_seed_does_not_change_modes(duct_problem):
    case, prob = duct_problem
    a = np.sort_complex(solve_linear(prob, case.solver).omegas)
    b = np.sort_complex(solve_linear(prob, case.solver, seed=5).omegas)
    np.testing.assert_allclose(a, b, rtol=1e-9)


# ---------------------------------------------------------------------------
# quadratic path


@pytest.mark.parametrize("seed", range(5))
def test_toar_matches_companion_oracle(seed):
    prob, (A, B, C) = random_quadratic(seed)
    cfg = SolverConfig(target=0.3 + 0.2j, nev=4, omega_min=0.0)
    ms = solve_quadratic(prob, cfg, keep_negative=True)
    ref = dense_companion_oracle(A, B, C)
    want = ref[np.argsort(np.abs(ref - cfg.target))][:4]
    got = ms.omegas
    assert len(got) == 4
    for w in want:
        assert np.min(np.abs(got - w)) <= 1e-8 * abs(w)
    assert max(ms.diagnostics["orthogonality"]) <= 1e-10


def test_scaling_on_off_invariance(cavity_problem):
    case, prob = cavity_problem
    on = np.sort_complex(solve_quadratic(prob, case.solver, scaling=True).omegas)
    off = np.sort_complex(solve_quadratic(prob, case.solver, scaling=False).omegas)
    np.testing.assert_allclose(on, off, rtol=1e-9)


def test_quadratic_on_linear_problem_equals_linear(duct_problem):
    case, prob = duct_problem
    lin = np.sort_complex(solve_linear(prob, case.solver).omegas)
    quad = np.sort_complex(solve(prob, case.solver, method="quadratic").omegas)
    np.testing.assert_allclose(quad, lin, rtol=1e-9)


def test_reactive_cavity_modes_real(cavity_problem):
    case, prob = cavity_problem
    ms = solve_quadratic(prob, case.solver)
    for m in ms:
        assert abs(m.omega.imag) <= 1e-6 * abs(m.omega.real)
        assert true_residual(prob, m.omega, m.shape) <= case.solver.tol
    # first reactive mode from the closed-form formula is 337.5 Hz
    f = min(m.frequency_hz for m in ms)
    assert f == pytest.approx(337.5, rel=1e-2)


def test_resistive_cavity_growth_rate():
    case = cavity_case(Z=3.0, nx=50, ny=4)
    prob = assemble(case)
    ms = solve_quadratic(prob, case.solver)
    expected = -(450 / (4 * math.pi * 0.5)) * math.log(2.0)
    for m in ms:
        assert m.omega.imag / TWO_PI == pytest.approx(expected, rel=2e-2)
        assert m.stability is Stability.STABLE


def test_companion_oracle_agrees_on_small_cavity():
    case = cavity_case(Z=1j, nx=10, ny=5)
    prob = assemble(case)
    ms = solve_quadratic(prob, case.solver)
    ref = dense_companion_oracle(prob.A.toarray(), prob.B.toarray(), prob.C.toarray())
    for w in ms.omegas:
        assert np.min(np.abs(ref - w)) <= 1e-8 * abs(w)


# ---------------------------------------------------------------------------
# NLEIGS


def test_nleigs_flame_off_equals_linear():
    case = flame_duct_case(n_cells=100, eta=0.0)
    prob = assemble(case)
    assert prob.kind is ProblemKind.LINEAR
    nl = solve_nonlinear_nleigs(prob, case.solver)
    lin = solve_linear(prob, case.solver.with_(nev=len(nl)))
    for w in nl.omegas:
        assert np.min(np.abs(lin.omegas - w)) <= 1e-10 * abs(w)


def test_nleigs_matches_determinant_oracle(small_flame):
    case, prob = small_flame
    ms = solve_nonlinear_nleigs(prob, case.solver)
    roots = determinant_scan_oracle(dense_operator(prob), case.solver.region)
    assert len(roots) == len(ms) > 0
    for w in ms.omegas:
        assert np.min(np.abs(roots - w)) <= 1e-6 * abs(w)
        m = next(m for m in ms if m.omega == w)
        assert true_residual(prob, w, m.shape) <= 1e-8


def test_nleigs_region_contract(small_flame):
    case, prob = small_flame
    ms = solve_nonlinear_nleigs(prob, case.solver)
    x0, x1, y0, y1 = case.solver.region
    dx, dy = 0.01 * (x1 - x0), 0.01 * (y1 - y0)
    for w in ms.omegas:
        assert x0 - dx <= w.real <= x1 + dx
        assert y0 - dy <= w.imag <= y1 + dy
    assert max(ms.diagnostics["orthogonality"]) <= 1e-10


def test_nleigs_requires_region(duct_problem):
    case, prob = duct_problem
    with pytest.raises(InvalidArgument):
        solve_nonlinear_nleigs(prob, case.solver.with_(region=None))


def test_nleigs_scalar_delay_against_oracle():
    kappa, tau = (TWO_PI * 100) ** 2, 1e-3
    S = Rank1Source(np.array([kappa], dtype=complex), np.array([0]), np.array([1.0 + 0j]),
                    ((1.0, tau),))
    prob = AssembledProblem(sp.csr_matrix((1, 1), dtype=complex), None,
                            sp.identity(1, format="csr", dtype=complex), S,
                            kind=ProblemKind.NONLINEAR)
    region = (TWO_PI * 10, TWO_PI * 400, -TWO_PI * 100, TWO_PI * 100)
    cfg = SolverConfig(nev=1, region=region, target=complex(sum(region[:2]) / 2, 0))
    ms = solve_nonlinear_nleigs(prob, cfg)
    roots = determinant_scan_oracle(dense_operator(prob), region)
    assert len(ms) == len(roots) >= 1
    for w in ms.omegas:
        assert abs(w * w - kappa * np.exp(1j * w * tau)) <= 1e-8 * kappa
        assert np.min(np.abs(roots - w)) <= 1e-8 * abs(w)


# ---------------------------------------------------------------------------
# iterative baseline


def test_iterative_flame_off_converges_immediately():
    case = flame_duct_case(n_cells=100, eta=0.0)
    prob = assemble(case)
    ms = solve_nonlinear_iterative(prob, case.solver)
    lin = solve_linear(prob, case.solver)
    for m in ms:
        assert m.converged
        assert len(m.history) - 1 <= 1
        assert np.min(np.abs(lin.omegas - m.omega)) <= 1e-9 * abs(m.omega)


def test_iterative_agrees_with_nleigs_on_flame():
    case = flame_duct_case(n_cells=200)
    prob = assemble(case)
    it = solve_nonlinear_iterative(prob, case.solver)
    nl = solve_nonlinear_nleigs(prob, case.solver)
    assert all(m.converged for m in it)
    for m in it:
        w = nl.omegas[np.argmin(np.abs(nl.omegas - m.omega))]
        assert abs(w.real - m.omega.real) / TWO_PI <= 0.1
        assert abs(w.imag - m.omega.imag) <= 0.1


def test_iterative_flags_close_modes():
    case = close_modes_case()
    prob = assemble(case)
    ms = solve_nonlinear_iterative(prob, case.solver)
    assert ms.diagnostics["nonconverged"] >= 1
    bad = [m for m in ms if not m.converged]
    assert len(bad[0].history) == ms.diagnostics["max_fp_iters"] + 1


# ---------------------------------------------------------------------------
# matrix-free path and dispatch


def test_matrix_free_equals_explicit_on_orthogonal_mesh(cavity_problem):
    case = cavity_case(Z=1j, nx=20, ny=4)
    prob = assemble(case, matrix_free=True)
    explicit = np.sort_complex(solve(prob, case.solver).omegas)
    mf = solve_with_matrix_free(prob, case.solver)
    assert mf.diagnostics["matrix_free"]
    np.testing.assert_allclose(np.sort_complex(mf.omegas), explicit, rtol=1e-10)


def test_matrix_free_skewed_cavity():
    case = cavity_case(Z=1j, nx=10, ny=10, skew=(0.2, 3))
    prob = assemble(case, matrix_free=True)
    first = np.sort_complex(solve(prob, case.solver).omegas)
    mf = solve_with_matrix_free(prob, case.solver)
    assert mf.diagnostics["max_gmres_iterations"] <= 25
    second = np.sort_complex(mf.omegas)
    assert np.max(np.abs(second - first) / np.abs(first)) > 1e-6
    mfsp = SplitProblem(prob, matrix_free=True)
    for m in mf:
        assert residual(mfsp, m.omega, m.shape) <= case.solver.tol


def test_matrix_free_nonlinear_flame():
    case = flame_duct_case(n_cells=60)
    prob = assemble(case, matrix_free=True)
    ms = solve_with_matrix_free(prob, case.solver)
    mfsp = SplitProblem(prob, matrix_free=True)
    assert len(ms) >= 1
    for m in ms:
        assert residual(mfsp, m.omega, m.shape) <= case.solver.tol


def test_dispatch(duct_problem, small_flame):
    assert default_method(ProblemKind.NONLINEAR) == "nleigs"
    case, prob = small_flame
    assert solve(prob, case.solver).diagnostics["path"] == "nleigs"
    with pytest.raises(InvalidArgument):
        solve(prob, case.solver, method="quadratic")
    with pytest.raises(InvalidArgument):
        solve(prob, case.solver, method="bogus")
    assert set(METHODS) >= {"linear", "quadratic", "nleigs", "iterative", "matrix-free"}


def test_impedance_case_classified_quadratic(duct_problem):
    case, _ = duct_problem
    c2 = with_boundary(case, "right", {"kind": "ConstantImpedance", "Z": [2.0, 0.0]})
    assert assemble(c2).kind is ProblemKind.QUADRATIC
