"""Acceptance criteria, one test per criterion.

Each test prints a single pass/fail line.  Runtime limits are checked
with jit compilation excluded: the session-scoped fixture below touches
every hot kernel once before any timer starts.
"""

import time

import numpy as np
import pytest
import scipy.linalg as sla

from hvibem import bem
from hvibem.fem import material_by_name
from hvibem.harness.cases import manufactured_case
from hvibem.harness.studies import run_eps_study, run_h_study, write_csv
from hvibem.mesh import build_polygon_mesh, refine_uniform
from hvibem.smoothing import (
    SmoothingParams,
    nonconvex,
    superpotential_slope,
    superpotential_value,
    tresca,
    unsmoothed_value,
)
from hvibem.solver import (
    SolverConfig,
    assemble_system,
    energy,
    residual,
    solve_newton,
)

SQUARE = [(-0.2, -0.2), (0.2, -0.2), (0.2, 0.2), (-0.2, 0.2)]
LABELS = ["S", "T", "T", "T"]


def _report(num, ok, detail):
    print(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


@pytest.fixture(scope="module", autouse=True)
def warm_kernels():
    # first touch compiles the jit kernels; timings below must not pay that
    mesh = build_polygon_mesh(SQUARE, 0.2, LABELS)
    bem.boundary_operator_set(mesh)
    mat = material_by_name("linear")
    from hvibem.fem import assemble_dg_residual, assemble_dg_tangent

    u = np.zeros(mesh.n_vertices)
    assemble_dg_residual(mesh, mat, u)
    assemble_dg_tangent(mesh, mat, u)


def test_criterion_1_smoothing_gap_bound():
    t0 = time.perf_counter()
    grid = np.linspace(-5.0, 5.0, 10_000)
    worst = []
    for spec in (tresca(2.0), nonconvex(1.0, 0.5)):
        for eps in (1.0, 0.1, 0.01):
            params = SmoothingParams(eps)
            gap = np.abs(
                superpotential_value(spec, params, 0.0, grid)
                - unsmoothed_value(spec, 0.0, grid)
            ).max()
            bound = params.error_bound(spec.m)
            worst.append((spec.name, eps, gap, bound, gap <= bound))
    elapsed = time.perf_counter() - t0
    ok = all(w[4] for w in worst) and elapsed < 1.0
    margin = max(w[2] / w[3] for w in worst)
    _report(1, ok, f"max gap/bound ratio {margin:.3f}, {elapsed:.2f}s")


def test_criterion_2_derivative_certificates():
    t0 = time.perf_counter()
    eps = 0.01
    params = SmoothingParams(eps)
    worst_rel = 0.0
    worst_lam = 0.0
    for spec, g in ((tresca(2.0), 2.0), (nonconvex(1.0, 0.5), 1.0)):
        x = np.linspace(-2.0, 2.0, 20_001)
        # P kinks sit where the nested branch difference is +-eps/2
        z = -2.0 * g * x
        x = x[np.abs(np.abs(z) - eps / 2) > 1e-3 * eps]
        h = 1e-7
        fd = (
            superpotential_value(spec, params, 0.0, x + h)
            - superpotential_value(spec, params, 0.0, x - h)
        ) / (2 * h)
        slope, lam = superpotential_slope(spec, params, 0.0, x)
        rel = np.max(np.abs(slope - fd) / np.maximum(1.0, np.abs(fd)))
        worst_rel = max(worst_rel, rel)
        assert lam.min() >= 0.0 and lam.max() <= 1.0
        worst_lam = max(worst_lam, np.max(np.abs(lam.sum(axis=0) - 1.0)))
    elapsed = time.perf_counter() - t0
    ok = worst_rel <= 1e-6 and worst_lam <= 1e-12 and elapsed < 1.0
    _report(2, ok, f"slope vs FD {worst_rel:.2e}, weight sum defect "
                   f"{worst_lam:.2e}, {elapsed:.2f}s")


def test_criterion_3_bem_operator_correctness():
    t0 = time.perf_counter()
    # 64 panels per side of the scaled square: 256 total
    mesh = build_polygon_mesh(SQUARE, 0.0089, LABELS)
    geom = bem.boundary_geometry(mesh)
    n = geom.n_panels
    ops = bem.boundary_operator_set(mesh)
    V, W = ops.V, ops.W

    a = np.array([0.0, 0.0])
    b = np.array([0.5, 0.0])
    self_err = abs(
        bem.sl_panel_pair(a, b, a, b)
        - 0.25 * (1.5 - np.log(0.5)) / (2 * np.pi)
    )

    L = geom.lengths[0]
    phi = lambda t: 0.0 if t == 0.0 else 0.5 * t * t * (np.log(t) - 1.5)
    adj_oracle = -(phi(0.0) - 2.0 * phi(L) + phi(2.0 * L)) / (2 * np.pi)
    adj_err = abs(V[0, 1] - adj_oracle)

    v_sym = np.max(np.abs(V - V.T)) / np.max(np.abs(V))
    w_sym = np.max(np.abs(W - W.T)) / np.max(np.abs(W))
    w_one = np.max(np.abs(W @ np.ones(W.shape[0]))) / np.max(np.abs(W))
    elapsed = time.perf_counter() - t0
    ok = (
        n == 256
        and self_err <= 1e-10
        and adj_err <= 1e-10
        and v_sym <= 1e-12
        and w_sym <= 1e-12
        and w_one <= 1e-12
        and elapsed < 5.0
    )
    _report(3, ok, f"{n} panels, self {self_err:.1e}, adjacent {adj_err:.1e}, "
                   f"sym {max(v_sym, w_sym):.1e}, W@1 {w_one:.1e}, {elapsed:.1f}s")


def test_criterion_4_discrete_coercivity_across_levels():
    t0 = time.perf_counter()
    mesh = build_polygon_mesh(SQUARE, 0.2, LABELS)
    mins, consts = [], []
    for _ in range(4):
        st = bem.build_steklov(bem.boundary_operator_set(mesh))
        mins.append(float(np.linalg.eigvalsh(st.S).min()))
        consts.append(bem.l2_coercivity_constant(st))
        mesh = refine_uniform(mesh)
    elapsed = time.perf_counter() - t0
    spread = max(consts) / min(consts)
    ok = all(m > 0 for m in mins) and spread < 2.0 and elapsed < 30.0
    _report(4, ok, f"min eigs {[f'{m:.2e}' for m in mins]}, coercivity "
                   f"{[f'{c:.3f}' for c in consts]} spread {spread:.2f}, "
                   f"{elapsed:.1f}s")


def test_criterion_5_steklov_spectrum_circle():
    r = 0.4
    n = 64
    ang = 2 * np.pi * np.arange(n) / n
    poly = [(r * np.cos(t), r * np.sin(t)) for t in ang]
    mesh = build_polygon_mesh(poly, 0.05, ["S"] + ["T"] * (n - 1))
    ops = bem.boundary_operator_set(mesh)
    st = bem.build_steklov(ops)
    M1 = bem.boundary_p1_mass(ops.geometry)
    eigs = np.sort(sla.eigh(st.S, M1, eigvals_only=True))
    # spectrum: k=1 pair, then the gauge mode, then the k=2 pair
    rel = [
        abs(eigs[0] - 1 / r) / (1 / r),
        abs(eigs[1] - 1 / r) / (1 / r),
        abs(eigs[3] - 2 / r) / (2 / r),
        abs(eigs[4] - 2 / r) / (2 / r),
    ]
    ok = max(rel) <= 0.05
    _report(5, ok, f"k=1,2 eigenvalue errors {[f'{e:.4f}' for e in rel]} "
                   f"(limit 0.05)")


def test_criterion_6_energy_gradient_consistency():
    t0 = time.perf_counter()
    case = manufactured_case("tresca-square")
    mesh = build_polygon_mesh(case.polygon, 0.1, list(case.labels))
    system = assemble_system(
        mesh, case.material, case.spec, SmoothingParams(0.05), case.data
    )
    rng = np.random.default_rng(20)
    worst = 0.0
    h = 1e-6
    for _ in range(10):
        x = 0.1 * rng.standard_normal(system.n_dof)
        x[-1] = 0.0
        F = residual(system, x)[:-1]
        g_fd = np.empty(system.n_dof - 1)
        for k in range(system.n_dof - 1):
            e = np.zeros(system.n_dof)
            e[k] = h
            g_fd[k] = (energy(system, x + e) - energy(system, x - e)) / (2 * h)
        rel = np.max(np.abs(F - g_fd) / np.maximum(1.0, np.abs(g_fd)))
        worst = max(worst, rel)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 10.0
    _report(6, ok, f"residual vs FD gradient {worst:.2e} over 10 states, "
                   f"{elapsed:.1f}s")


def test_criterion_7_strong_monotonicity():
    mesh = refine_uniform(build_polygon_mesh(SQUARE, 0.1, LABELS))
    st = bem.build_steklov(bem.boundary_operator_set(mesh))
    c_disc = bem.l2_coercivity_constant(st)
    geom = st.geometry
    M1s = bem.boundary_p1_mass(geom, labels=("S",))

    case = manufactured_case("tresca-square")
    system = assemble_system(
        mesh, case.material, tresca(1.0), SmoothingParams(0.02), case.data
    )
    vb = system.vb
    S_ss = st.S[np.ix_(vb, vb)]
    M_ss = M1s[np.ix_(vb, vb)]
    lens = system.friction.lengths[system.dual_free]
    s_arc = system.friction.s[system.dual_free]

    beta = 0.5 * c_disc
    spec_nc = nonconvex(1.0, beta)
    params = SmoothingParams(0.02)
    rng = np.random.default_rng(77)

    def quotient(spec, v1, v2):
        d = v1 - v2
        if spec is None:
            g1 = S_ss @ v1
            g2 = S_ss @ v2
        else:
            g1 = S_ss @ v1 + superpotential_slope(spec, params, s_arc, v1)[0] * lens
            g2 = S_ss @ v2 + superpotential_slope(spec, params, s_arc, v2)[0] * lens
        return float((g1 - g2) @ d) / float(d @ (M_ss @ d))

    off, on = [], []
    for _ in range(100):
        v1 = 0.5 * rng.standard_normal(vb.size)
        v2 = 0.5 * rng.standard_normal(vb.size)
        off.append(quotient(None, v1, v2))
        on.append(quotient(spec_nc, v1, v2))
    ok = min(off) > 0 and min(on) >= 0.4 * c_disc
    _report(7, ok, f"friction-off min {min(off):.3f} > 0; nonconvex at "
                   f"beta=0.5c min {min(on):.3f} >= {0.4 * c_disc:.3f}")


def test_criterion_8_newton_vs_descent_oracle():
    t0 = time.perf_counter()
    case = manufactured_case("tresca-square")
    mesh = build_polygon_mesh(case.polygon, 0.15, list(case.labels))
    system = assemble_system(
        mesh, case.material, case.spec, SmoothingParams(0.05), case.data
    )
    assert system.n_dof <= 60
    sol = solve_newton(system, SolverConfig(tol=1e-13))
    x_newton = np.concatenate([sol.u, sol.v])

    # oracle: projected Barzilai-Borwein descent on the energy with a
    # finite-difference gradient, feasible w.r.t. the gauge constraint
    c = np.zeros(system.n_dof - 1)
    np.add.at(c, system.bids, system.c_bnd)
    c[system.n_u :] += system.c_bnd[system.vb]
    b = system.b_c

    def fd_grad(y):
        g = np.empty(y.size)
        h = 1e-7
        z = np.concatenate([y, [0.0]])
        for k in range(y.size):
            e = np.zeros(system.n_dof)
            e[k] = h
            g[k] = (energy(system, z + e) - energy(system, z - e)) / (2 * h)
        return g - (c @ g / (c @ c)) * c

    y = (b / (c @ c)) * c
    g = fd_grad(y)
    step = 1e-2
    y_old, g_old = y.copy(), g.copy()
    for it in range(2000):
        gn = np.linalg.norm(g)
        if gn <= 1e-9:
            break
        y = y - step * g
        g_new = fd_grad(y)
        dy = y - y_old
        dg = g_new - g_old
        denom = float(dy @ dg)
        step = float(dy @ dy) / denom if denom > 1e-16 else 1e-2
        y_old, g_old = y.copy(), g_new.copy()
        g = g_new
    dev = np.max(np.abs(y - x_newton))
    elapsed = time.perf_counter() - t0
    ok = gn <= 1e-9 and dev <= 1e-6 and elapsed < 60.0
    _report(8, ok, f"{system.n_dof} dofs, descent grad {gn:.1e} after "
                   f"{it} steps, max coefficient gap {dev:.2e}, {elapsed:.1f}s")


def test_criterion_9_manufactured_convergence():
    t0 = time.perf_counter()
    case = manufactured_case("dipole-linear")
    report = run_h_study(case, levels=4, eps=1e-3)
    order = report.observed_orders["err_h1_interior"]
    probes = [r.exterior_point_errors for r in report.rows]
    halves = all(
        b <= 0.5 * a for fine, coarse in zip(probes[1:], probes)
        for a, b in zip(coarse, fine)
    )
    elapsed = time.perf_counter() - t0
    ok = (
        all(r.converged for r in report.rows)
        and order >= 0.5
        and halves
        and elapsed < 120.0
    )
    _report(9, ok, f"interior H1 order {order:.2f} (floor 0.5), probe errors "
                   f"halve: {halves}, {elapsed:.1f}s")


def test_criterion_10_regularization_convergence():
    t0 = time.perf_counter()
    case = manufactured_case("tresca-square")
    report = run_eps_study(case, [0.1, 0.05, 0.025, 0.0125], h_level=2)
    diffs = [r.diff_enorm for r in report.rows if np.isfinite(r.diff_enorm)]
    decreasing = all(b < a for a, b in zip(diffs, diffs[1:]))
    iters_ok = all(r.converged and r.newton_iters <= 30 for r in report.rows)
    elapsed = time.perf_counter() - t0
    ok = decreasing and iters_ok and elapsed < 120.0
    _report(10, ok, f"E-norm differences {[f'{d:.2e}' for d in diffs]} "
                    f"strictly decreasing: {decreasing}, iters "
                    f"{[r.newton_iters for r in report.rows]}, {elapsed:.1f}s")


def test_criterion_11_tresca_flux_bound():
    g_bound = 1.0
    case = manufactured_case("tresca-square")
    mesh = refine_uniform(build_polygon_mesh(case.polygon, 0.1, list(case.labels)))
    eps = 0.01
    system = assemble_system(
        mesh, case.material, case.spec, SmoothingParams(eps), case.data
    )
    sol = solve_newton(system)
    v_all = system.v_all_cells(sol.v)
    slope, _ = superpotential_slope(
        case.spec, SmoothingParams(eps), system.friction.s, v_all
    )
    peak = float(np.max(np.abs(slope)))
    ok = bool(np.all(np.abs(slope) <= g_bound))
    _report(11, ok, f"max |smoothed slope| {peak:.12f} <= g = {g_bound} "
                    f"at {v_all.size} friction nodes (exact)")


def test_criterion_12_reproducible_csv(tmp_path):
    case = manufactured_case("tresca-square")
    p1 = tmp_path / "run1.csv"
    p2 = tmp_path / "run2.csv"
    write_csv(run_h_study(case, levels=3, eps=0.01), p1)
    write_csv(run_h_study(case, levels=3, eps=0.01), p2)
    ok = p1.read_bytes() == p2.read_bytes()
    _report(12, ok, f"two runs, {len(p1.read_bytes())} bytes, byte-identical: {ok}")
