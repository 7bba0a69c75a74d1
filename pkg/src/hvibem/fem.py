"""P1 finite elements for the quasilinear interior operator.

The interior problem is -div(p(|grad u|) grad u) = f0 with a scalar
coefficient law p.  On P1 elements the gradient is constant per triangle,
so one-point quadrature assembles the residual and consistent tangent
exactly; loads use the three-edge-midpoint rule (exact for quadratics).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _kernels as K
from .mesh import triangle_areas

__all__ = [
    "MaterialLaw",
    "material_by_name",
    "validate_material",
    "assemble_dg_residual",
    "assemble_dg_tangent",
    "assemble_load",
    "interior_energy",
    "material_energy_density",
    "p1_stiffness",
    "p1_mass",
    "trace_matrix",
    "boundary_node_ids",
]

_T_FLOOR = 1e-12  # below this |grad u| use the p(0) I tangent limit


@dataclass(frozen=True)
class MaterialLaw:
    """Scalar coefficient law p(t), t = |grad u|, with derivative dp."""

    name: str
    p: callable
    dp: callable
    p_min: float
    p_max: float

    def p0(self):
        return float(self.p(0.0))


def material_by_name(name):
    """Catalog: "linear" (p = 1) and "shear-thinning" (p = 2 + 1/(1+t))."""
    if name == "linear":
        return MaterialLaw(
            name="linear",
            p=lambda t: np.ones_like(np.asarray(t, dtype=np.float64)),
            dp=lambda t: np.zeros_like(np.asarray(t, dtype=np.float64)),
            p_min=1.0,
            p_max=1.0,
        )
    if name == "shear-thinning":
        return MaterialLaw(
            name="shear-thinning",
            p=lambda t: 2.0 + 1.0 / (1.0 + np.asarray(t, dtype=np.float64)),
            dp=lambda t: -1.0 / (1.0 + np.asarray(t, dtype=np.float64)) ** 2,
            p_min=2.0,
            p_max=3.0,
        )
    raise ValueError(f"unknown material {name!r}")


def validate_material(mat, t_max=10.0, n=2001):
    """Check 0 < p_min <= p <= p_max, monotone t p(t), dp consistent with p."""
    t = np.linspace(0.0, t_max, n)
    pv = np.asarray(mat.p(t), dtype=np.float64)
    if not np.all(pv >= mat.p_min - 1e-12) or not np.all(pv <= mat.p_max + 1e-12):
        raise ValueError(f"material {mat.name}: p(t) leaves [p_min, p_max]")
    if mat.p_min <= 0.0:
        raise ValueError(f"material {mat.name}: p_min must be positive")
    flux = t * pv
    if np.any(np.diff(flux) <= 0.0):
        raise ValueError(f"material {mat.name}: t p(t) is not increasing")
    delta = 1e-6 * np.maximum(1.0, t[1:])
    fd = (mat.p(t[1:] + delta) - mat.p(t[1:] - delta)) / (2.0 * delta)
    err = np.max(np.abs(fd - mat.dp(t[1:])))
    if err > 1e-6:
        raise ValueError(f"material {mat.name}: dp mismatch {err:.2e}")
    return True


def _p1_geometry(mesh):
    """Areas and constant P1 basis gradients, (m,) and (m, 3, 2)."""
    v = mesh.vertices
    t = mesh.triangles
    p0, p1, p2 = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    areas = triangle_areas(v, t)
    g = np.empty((t.shape[0], 3, 2))
    inv = 1.0 / (2.0 * areas)
    g[:, 0, 0] = (p1[:, 1] - p2[:, 1]) * inv
    g[:, 0, 1] = (p2[:, 0] - p1[:, 0]) * inv
    g[:, 1, 0] = (p2[:, 1] - p0[:, 1]) * inv
    g[:, 1, 1] = (p0[:, 0] - p2[:, 0]) * inv
    g[:, 2, 0] = (p0[:, 1] - p1[:, 1]) * inv
    g[:, 2, 1] = (p1[:, 0] - p0[:, 0]) * inv
    return areas, g


def _element_gradients(mesh, u, geom=None):
    areas, g = geom if geom is not None else _p1_geometry(mesh)
    gu = np.einsum("mi,mij->mj", u[mesh.triangles], g)
    return areas, g, gu


def assemble_dg_residual(mesh, material, u):
    """Residual vector of the quasilinear form, r_j = sum_T A p(|gu|) gu . grad phi_j."""
    u = np.asarray(u, dtype=np.float64)
    areas, g, gu = _element_gradients(mesh, u)
    t = np.linalg.norm(gu, axis=1)
    c = areas * np.asarray(material.p(t), dtype=np.float64)
    elem = np.einsum("m,mij,mj->mi", c, g, gu)
    return K.scatter_vec(mesh.triangles, elem, mesh.n_vertices)


def assemble_dg_tangent(mesh, material, u):
    """Consistent Newton tangent; |gu| -> 0 limit is p(0) I per element."""
    u = np.asarray(u, dtype=np.float64)
    areas, g, gu = _element_gradients(mesh, u)
    t = np.linalg.norm(gu, axis=1)
    pv = np.asarray(material.p(t), dtype=np.float64)
    small = t < _T_FLOOR
    ts = np.where(small, 1.0, t)
    k = np.where(small, 0.0, np.asarray(material.dp(t), dtype=np.float64) / ts)
    mats = k[:, None, None] * gu[:, :, None] * gu[:, None, :]
    mats[:, 0, 0] += pv
    mats[:, 1, 1] += pv
    elem = np.einsum("m,mad,mde,mbe->mab", areas, g, mats, g)
    return K.scatter_mat(mesh.triangles, elem, mesh.n_vertices)


def assemble_load(mesh, f0):
    """Volume load with the edge-midpoint rule (degree-2 exact)."""
    v = mesh.vertices
    t = mesh.triangles
    areas = triangle_areas(v, t)
    p0, p1, p2 = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    m01 = (p0 + p1) / 2.0
    m12 = (p1 + p2) / 2.0
    m20 = (p2 + p0) / 2.0
    f01 = np.asarray(f0(m01[:, 0], m01[:, 1]), dtype=np.float64)
    f12 = np.asarray(f0(m12[:, 0], m12[:, 1]), dtype=np.float64)
    f20 = np.asarray(f0(m20[:, 0], m20[:, 1]), dtype=np.float64)
    w = areas / 6.0
    elem = np.stack(
        [w * (f01 + f20), w * (f01 + f12), w * (f12 + f20)], axis=1
    )
    return K.scatter_vec(t, elem, mesh.n_vertices)


def material_energy_density(material, t, tol=1e-12):
    """g(t) = int_0^t s p(s) ds by uniformly refined composite Simpson.

    Vectorized over t; the panel count doubles until the elementwise change
    is below tol (relative to max(1, |g|)).
    """
    t = np.asarray(t, dtype=np.float64)
    shape = t.shape
    tf = np.abs(t).ravel()

    def simpson(n):
        xs = np.linspace(0.0, 1.0, n + 1)[None, :] * tf[:, None]
        fx = xs * np.asarray(material.p(xs), dtype=np.float64)
        w = np.ones(n + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return (tf / (3.0 * n)) * (fx @ w)

    val = simpson(8)
    n = 16
    while n <= 4096:
        new = simpson(n)
        if np.max(np.abs(new - val) / np.maximum(1.0, np.abs(new))) <= tol:
            val = new
            break
        val = new
        n *= 2
    return val.reshape(shape)


def interior_energy(mesh, material, u):
    """G(u) = sum_T area g(|grad u|_T)."""
    u = np.asarray(u, dtype=np.float64)
    areas, _, gu = _element_gradients(mesh, u)
    t = np.linalg.norm(gu, axis=1)
    return float(areas @ material_energy_density(material, t))


def p1_stiffness(mesh):
    """Plain Laplace stiffness (the H1 seminorm Gram matrix)."""
    areas, g = _p1_geometry(mesh)
    elem = np.einsum("m,mad,mbd->mab", areas, g, g)
    return K.scatter_mat(mesh.triangles, elem, mesh.n_vertices)


def p1_mass(mesh):
    """Exact P1 mass matrix on Omega."""
    areas = triangle_areas(mesh.vertices, mesh.triangles)
    local = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
    elem = areas[:, None, None] * local[None, :, :]
    return K.scatter_mat(mesh.triangles, elem, mesh.n_vertices)


def boundary_node_ids(mesh):
    """Boundary node ids in CCW loop order (the boundary P1 dof order)."""
    return mesh.boundary_loop()


def trace_matrix(mesh):
    """0/1 selection matrix from interior nodal vectors to boundary nodal vectors."""
    ids = boundary_node_ids(mesh)
    nb = ids.shape[0]
    return sp.csr_matrix(
        (np.ones(nb), (np.arange(nb), ids)), shape=(nb, mesh.n_vertices)
    )
