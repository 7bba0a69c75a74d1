import numpy as np
import pytest

from hvibem.fem import (
    MaterialLaw,
    assemble_dg_residual,
    assemble_dg_tangent,
    assemble_load,
    interior_energy,
    material_by_name,
    material_energy_density,
    p1_mass,
    p1_stiffness,
    trace_matrix,
    validate_material,
)
from hvibem.mesh import build_polygon_mesh, refine_uniform

SQUARE = [(-0.2, -0.2), (0.2, -0.2), (0.2, 0.2), (-0.2, 0.2)]
LABELS = ["S", "T", "T", "T"]


def _mesh(h=0.1, refine=0):
    m = build_polygon_mesh(SQUARE, h, LABELS)
    for _ in range(refine):
        m = refine_uniform(m)
    return m


def test_shear_thinning_energy_density_closed_form():
    # p(t) = 2 + 1/(1+t)  =>  g(t) = t^2 + t - log(1+t)
    mat = material_by_name("shear-thinning")
    t = np.array([0.0, 0.25, 1.0, 3.7])
    expected = t * t + t - np.log1p(t)
    np.testing.assert_allclose(material_energy_density(mat, t), expected,
                               atol=1e-10)
    assert expected[2] == pytest.approx(2.0 - np.log(2.0))


def test_linear_material_energy_density_is_half_square():
    mat = material_by_name("linear")
    t = np.linspace(0, 4, 9)
    np.testing.assert_allclose(material_energy_density(mat, t), 0.5 * t * t,
                               atol=1e-12)


def test_affine_field_energy_and_residual_pairing():
    mesh = _mesh()
    mat = material_by_name("linear")
    u = 2.0 * mesh.vertices[:, 0] + 3.0 * mesh.vertices[:, 1]
    # |grad u|^2 = 13 over area 0.16
    assert interior_energy(mesh, mat, u) == pytest.approx(0.16 * 13 / 2, rel=1e-12)
    r = assemble_dg_residual(mesh, mat, u)
    assert float(r @ u) == pytest.approx(0.16 * 13, rel=1e-12)


def test_linear_residual_equals_stiffness_action():
    mesh = _mesh(refine=1)
    mat = material_by_name("linear")
    rng = np.random.default_rng(11)
    u = rng.standard_normal(mesh.n_vertices)
    np.testing.assert_allclose(
        assemble_dg_residual(mesh, mat, u), p1_stiffness(mesh) @ u, atol=1e-12
    )
    np.testing.assert_allclose(
        assemble_dg_tangent(mesh, mat, u), p1_stiffness(mesh), atol=1e-12
    )


def test_residual_is_gradient_of_energy():
    mesh = _mesh()
    mat = material_by_name("shear-thinning")
    rng = np.random.default_rng(5)
    u = 0.3 * rng.standard_normal(mesh.n_vertices)
    r = assemble_dg_residual(mesh, mat, u)
    h = 1e-6
    for k in rng.integers(0, mesh.n_vertices, size=8):
        e = np.zeros(mesh.n_vertices)
        e[k] = h
        fd = (interior_energy(mesh, mat, u + e)
              - interior_energy(mesh, mat, u - e)) / (2 * h)
        assert r[k] == pytest.approx(fd, rel=2e-6, abs=1e-9)


def test_tangent_is_jacobian_of_residual_and_symmetric():
    mesh = _mesh()
    mat = material_by_name("shear-thinning")
    rng = np.random.default_rng(6)
    u = 0.3 * rng.standard_normal(mesh.n_vertices)
    J = assemble_dg_tangent(mesh, mat, u)
    np.testing.assert_allclose(J, J.T, atol=1e-14)
    h = 1e-6
    d = rng.standard_normal(mesh.n_vertices)
    fd = (assemble_dg_residual(mesh, mat, u + h * d)
          - assemble_dg_residual(mesh, mat, u - h * d)) / (2 * h)
    np.testing.assert_allclose(J @ d, fd, rtol=0, atol=5e-7)


def test_tangent_well_defined_at_zero_gradient():
    mesh = _mesh()
    mat = material_by_name("shear-thinning")
    J = assemble_dg_tangent(mesh, mat, np.zeros(mesh.n_vertices))
    # p(0) = 3 for the shear-thinning law: tangent is 3x the stiffness
    np.testing.assert_allclose(J, 3.0 * p1_stiffness(mesh), atol=1e-12)


def test_load_vector_integrates_source():
    mesh = _mesh(refine=1)
    load = assemble_load(mesh, lambda x, y: np.full_like(x, 2.5))
    assert load.sum() == pytest.approx(2.5 * 0.16, rel=1e-12)
    # linear sources are integrated exactly by the midpoint rule
    load_x = assemble_load(mesh, lambda x, y: x)
    assert float(load_x.sum()) == pytest.approx(0.0, abs=1e-15)


def test_mass_matrix_total_is_area():
    mesh = _mesh()
    M = p1_mass(mesh)
    assert M.sum() == pytest.approx(0.16, rel=1e-12)
    ones = np.ones(mesh.n_vertices)
    assert ones @ p1_stiffness(mesh) @ ones == pytest.approx(0.0, abs=1e-12)


def test_trace_matrix_selects_boundary_loop():
    mesh = _mesh()
    T = trace_matrix(mesh)
    u = mesh.vertices[:, 0] - 2 * mesh.vertices[:, 1]
    tails = mesh.boundary_edges[:, 0]
    np.testing.assert_allclose(T @ u, u[tails], atol=1e-15)


def test_validate_material_rejects_nonmonotone_flux():
    bad = MaterialLaw(
        name="bad",
        p=lambda t: 1.0 / (1.0 + np.asarray(t)) ** 2,
        dp=lambda t: -2.0 / (1.0 + np.asarray(t)) ** 3,
        p_min=0.0,
        p_max=1.0,
    )
    with pytest.raises(ValueError):
        validate_material(bad)


def test_validate_material_rejects_wrong_derivative():
    bad = MaterialLaw(
        name="bad-dp",
        p=lambda t: 2.0 + np.zeros_like(np.asarray(t, dtype=np.float64)),
        dp=lambda t: 1.0 + np.zeros_like(np.asarray(t, dtype=np.float64)),
        p_min=2.0,
        p_max=2.0,
    )
    with pytest.raises(ValueError):
        validate_material(bad)


def test_material_catalog():
    assert material_by_name("linear").p0() == 1.0
    assert material_by_name("shear-thinning").p0() == 3.0
    with pytest.raises(ValueError):
        material_by_name("plastic")
