import numpy as np
import pytest

from hvibem.fem import material_by_name
from hvibem.mesh import build_polygon_mesh, dual_partition, refine_uniform
from hvibem.smoothing import SmoothingParams, nonconvex, tresca, linear
from hvibem.solver import (
    FrictionTerm,
    NewtonFailure,
    ProblemData,
    SolverConfig,
    assemble_system,
    energy,
    friction_residual,
    friction_tangent,
    residual,
    solve_newton,
)

SQUARE = [(-0.2, -0.2), (0.2, -0.2), (0.2, 0.2), (-0.2, 0.2)]
LABELS = ["S", "T", "T", "T"]

DATA = ProblemData(
    f0=lambda x, y: np.ones_like(x),
    t0=lambda x, y, nx, ny: np.full_like(x, -0.1),
    u0=lambda x, y: np.zeros_like(x),
)


def _system(material="linear", spec=None, eps=1e-3, h=0.1, refine=0):
    mesh = build_polygon_mesh(SQUARE, h, LABELS)
    for _ in range(refine):
        mesh = refine_uniform(mesh)
    mat = material_by_name(material)
    if spec is None:
        spec = tresca(1.0)
    return assemble_system(mesh, mat, spec, SmoothingParams(eps), DATA)


def test_residual_is_energy_gradient():
    sys_ = _system("shear-thinning", nonconvex(1.0, 0.5), eps=1e-2)
    rng = np.random.default_rng(3)
    x = 0.05 * rng.standard_normal(sys_.n_dof)
    x[-1] = 0.0  # zero multiplier so F equals the energy gradient
    F = residual(sys_, x)
    h = 1e-6
    for k in rng.integers(0, sys_.n_dof - 1, size=10):
        e = np.zeros(sys_.n_dof)
        e[k] = h
        fd = (energy(sys_, x + e) - energy(sys_, x - e)) / (2 * h)
        assert F[k] == pytest.approx(fd, rel=5e-6, abs=1e-8)


def test_jacobian_symmetric_and_consistent():
    from hvibem.solver import _jacobian

    sys_ = _system("shear-thinning", nonconvex(1.0, 0.5), eps=1e-2)
    rng = np.random.default_rng(4)
    x = 0.05 * rng.standard_normal(sys_.n_dof)
    J = _jacobian(sys_, x)
    # quasilinear tangent contraction leaves rounding-level asymmetry only
    assert np.max(np.abs(J - J.T)) < 1e-13
    h = 1e-6
    d = rng.standard_normal(sys_.n_dof)
    fd = (residual(sys_, x + h * d) - residual(sys_, x - h * d)) / (2 * h)
    np.testing.assert_allclose(J @ d, fd, atol=5e-6)


def test_linear_problem_converges_in_one_step():
    sys_ = _system("linear", linear(0.3))
    sol = solve_newton(sys_)
    assert sol.converged
    assert sol.iterations <= 2
    assert sol.residual_history[-1] < 1e-12


def test_gauge_constraint_holds_at_solution():
    sys_ = _system("shear-thinning", tresca(1.0), eps=1e-2)
    sol = solve_newton(sys_)
    gb = sol.u[sys_.bids] + sys_.embed_v(sol.v)
    assert abs(sys_.c_bnd @ gb - sys_.b_c) < 1e-12


def test_energy_decreases_along_newton_iterates():
    sys_ = _system("shear-thinning", tresca(1.0), eps=1e-2)
    sol = solve_newton(sys_)
    eh = sol.energy_history
    assert all(b <= a + 1e-12 for a, b in zip(eh, eh[1:]))


def test_newton_failure_carries_history():
    sys_ = _system("shear-thinning", tresca(1.0), eps=1e-2)
    with pytest.raises(NewtonFailure) as err:
        solve_newton(sys_, SolverConfig(max_iter=1, tol=1e-14))
    assert len(err.value.history) >= 1


def test_warm_start_reuses_solution():
    sys_ = _system("shear-thinning", tresca(1.0), eps=1e-2)
    sol = solve_newton(sys_)
    x0 = np.concatenate([sol.u, sol.v, [sol.multiplier]])
    again = solve_newton(sys_, initial=x0)
    assert again.iterations == 0


def test_uniqueness_flag_tracks_onesided_constant():
    good = solve_newton(_system("linear", nonconvex(1.0, 1.0), eps=1e-2))
    assert good.uniqueness_ok and good.alpha_hat == pytest.approx(1.0, rel=1e-3)
    risky = solve_newton(_system("linear", nonconvex(1.0, 4.0), eps=1e-2))
    assert risky.alpha_hat == pytest.approx(4.0, rel=1e-3)
    assert not risky.uniqueness_ok


def test_friction_terms_scale_with_cell_measure():
    mesh = build_polygon_mesh(SQUARE, 0.1, LABELS)
    dual = dual_partition(mesh)
    term = FrictionTerm(s=dual.s, lengths=dual.lengths)
    spec = tresca(2.0)
    params = SmoothingParams(1e-3)
    v = np.full(dual.n_cells, 0.7)
    r = friction_residual(term, spec, params, v)
    np.testing.assert_allclose(r, 2.0 * dual.lengths, rtol=1e-12)
    t = friction_tangent(term, spec, params, v)
    np.testing.assert_allclose(t, 0.0, atol=1e-15)  # flat branch far from kink


def test_coarse_friction_side_without_interior_nodes_rejected():
    # one cell per side: the friction side has corner nodes only
    mesh = build_polygon_mesh(SQUARE, 0.6, LABELS)
    mat = material_by_name("linear")
    with pytest.raises(ValueError, match="refine"):
        assemble_system(mesh, mat, tresca(1.0), SmoothingParams(1e-3), DATA)


def test_nodal_u0_accepts_array_and_checks_length():
    mesh = build_polygon_mesh(SQUARE, 0.1, LABELS)
    mat = material_by_name("linear")
    nb = mesh.boundary_edges.shape[0]
    data = ProblemData(f0=DATA.f0, t0=DATA.t0, u0=np.zeros(nb))
    sys_ = assemble_system(mesh, mat, tresca(1.0), SmoothingParams(1e-3), data)
    assert sys_.u0_b.shape == (nb,)
    bad = ProblemData(f0=DATA.f0, t0=DATA.t0, u0=np.zeros(nb + 1))
    with pytest.raises(ValueError):
        assemble_system(mesh, mat, tresca(1.0), SmoothingParams(1e-3), bad)
