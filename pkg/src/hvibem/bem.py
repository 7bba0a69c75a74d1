"""Boundary-element operators for the exterior Laplace problem.

P0/P1 Galerkin matrices of the single layer V, double layer K and
hypersingular W on a closed polygonal boundary, and the discrete
Poincare-Steklov (exterior Dirichlet-to-Neumann) map

    S_h = W + (M/2 - K)^T V^{-1} (M/2 - K)

with M the P0xP1 duality mass.  Kernel normalization G = -(1/2pi) ln|x-y|;
with the boundary scaled into a disk of diameter < 1 about the origin the
logarithmic capacity is below one and V is SPD, so the Schur complement is
well defined and S_h is symmetric positive definite (no constant kernel:
this is the zero-gauge exterior map, the constant mode is handled by the
coupling constraint).

Singular integration: identical panels and collinear pairs use the exact
antiderivative of the log kernel; vertex-touching pairs use the exact inner
integral with a dyadically graded outer Gauss rule; separated pairs use the
exact inner integral with plain Gauss.  Entries are mirrored per unordered
pair, so V and W are symmetric to the last bit.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import _kernels as kern

__all__ = [
    "BoundaryGeometry",
    "BoundaryOperatorSet",
    "SteklovOperator",
    "boundary_geometry",
    "assemble_V",
    "assemble_K",
    "assemble_W",
    "boundary_operator_set",
    "build_steklov",
    "l2_coercivity_constant",
    "boundary_p1_mass",
    "boundary_p1_load",
    "reconstruct_exterior",
    "exterior_neumann_data",
    "write_operator",
    "read_operator",
    "sl_panel_pair",
]

_MAGIC = b"bemops v1"
_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class BoundaryGeometry:
    """Panel data of a closed CCW boundary loop.

    Panel k runs from boundary node k to node (k+1) % n in loop order, so
    the P1 dof index of its tail is k and of its head (k+1) % n.
    """

    node_ids: np.ndarray          # global mesh vertex ids, loop order
    points: np.ndarray            # (n, 2) node coordinates, loop order
    tails: np.ndarray             # (n, 2) panel start points
    heads: np.ndarray             # (n, 2) panel end points
    lengths: np.ndarray
    tangents: np.ndarray
    normals: np.ndarray           # outward
    labels: tuple

    @property
    def n_panels(self):
        return self.tails.shape[0]


def boundary_geometry(mesh, check_scaling=True):
    ids = mesh.boundary_edges[:, 0]
    pts = mesh.vertices[ids]
    tails = mesh.vertices[mesh.boundary_edges[:, 0]]
    heads = mesh.vertices[mesh.boundary_edges[:, 1]]
    d = heads - tails
    lens = np.linalg.norm(d, axis=1)
    tang = d / lens[:, None]
    normals = np.column_stack([tang[:, 1], -tang[:, 0]])
    if check_scaling:
        r = np.linalg.norm(pts, axis=1).max()
        if r >= 0.5:
            raise ValueError(
                "boundary must fit in a disk of diameter < 1 about the "
                f"origin for an SPD single layer (max |x| = {r:.4g}); "
                "rescale the domain"
            )
    return BoundaryGeometry(
        node_ids=ids.copy(),
        points=pts,
        tails=tails,
        heads=heads,
        lengths=lens,
        tangents=tang,
        normals=normals,
        labels=tuple(mesh.boundary_labels),
    )


def _gauss01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _graded01(n, levels=20, toward_start=True):
    """Composite Gauss on [0,1], intervals halving toward one endpoint."""
    gx, gw = _gauss01(n)
    pts = []
    wts = []
    hi = 1.0
    for k in range(levels):
        lo = 0.0 if k == levels - 1 else hi / 2.0
        pts.append(lo + (hi - lo) * gx)
        wts.append((hi - lo) * gw)
        hi = lo
    pts = np.concatenate(pts)
    wts = np.concatenate(wts)
    if not toward_start:
        pts = 1.0 - pts
    return pts, wts


def _classify_pairs(geom, tol=1e-13):
    """Index lists: vertex-touching pairs and collinear pairs (i < j)."""
    n = geom.n_panels
    scale = geom.lengths.max()
    touch = []
    collinear = []
    # node ids of each panel in boundary dof numbering
    for i in range(n):
        for j in range(i + 1, n):
            shared = {i, (i + 1) % n} & {j, (j + 1) % n}
            ti = geom.tangents[i]
            tj = geom.tangents[j]
            cross_dir = abs(ti[0] * tj[1] - ti[1] * tj[0])
            off = geom.tails[j] - geom.tails[i]
            cross_off = abs(ti[0] * off[1] - ti[1] * off[0])
            if cross_dir <= tol and cross_off <= tol * max(
                1.0, np.linalg.norm(off) / scale
            ):
                collinear.append((i, j))
            elif shared:
                touch.append((i, j, shared.pop()))
    return touch, collinear


def _phi_log(t):
    """Antiderivative pair: Phi'' (t) = ln|t|, Phi(0) = Phi'(0) = 0."""
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    nz = t != 0.0
    out[nz] = 0.5 * t[nz] ** 2 * (np.log(np.abs(t[nz])) - 1.5)
    return out


def _collinear_sl(a, b, c, d):
    """Integral of -(1/2pi) ln|x-y| over [a,b] x [c,d] on a common line."""
    val = (
        _phi_log(np.array(d - a))
        + _phi_log(np.array(c - b))
        - _phi_log(np.array(c - a))
        - _phi_log(np.array(d - b))
    )
    return -float(val) / _TWO_PI


def sl_panel_pair(a1, b1, a2, b2, gauss_order=16):
    """Galerkin single-layer entry for two arbitrary straight panels.

    Exact for identical or collinear panels; exact inner antiderivative
    with (graded, if touching) outer Gauss otherwise.  Mainly a reference
    entry point for tests; assemble_V handles whole boundaries.
    """
    a1 = np.asarray(a1, float)
    b1 = np.asarray(b1, float)
    a2 = np.asarray(a2, float)
    b2 = np.asarray(b2, float)
    L1 = float(np.linalg.norm(b1 - a1))
    L2 = float(np.linalg.norm(b2 - a2))
    t1 = (b1 - a1) / L1
    cross_dir = t1[0] * (b2 - a2)[1] - t1[1] * (b2 - a2)[0]
    off = a2 - a1
    cross_off = t1[0] * off[1] - t1[1] * off[0]
    if abs(cross_dir) <= 1e-13 * L2 and abs(cross_off) <= 1e-13 * max(L1, 1.0):
        s2 = float(np.dot(a2 - a1, t1))
        e2 = float(np.dot(b2 - a1, t1))
        return _collinear_sl(0.0, L1, min(s2, e2), max(s2, e2))
    # touching at a vertex?
    shared_tail = np.allclose(a1, a2) or np.allclose(a1, b2)
    shared_head = np.allclose(b1, a2) or np.allclose(b1, b2)
    if shared_tail or shared_head:
        gx, gw = _graded01(gauss_order, toward_start=shared_tail)
    else:
        gx, gw = _gauss01(gauss_order)
    obs = a1[None, :] + gx[:, None] * (b1 - a1)[None, :]
    inner = kern.sl_inner(
        obs[:, 0].copy(), obs[:, 1].copy(),
        np.array([a2[0]]), np.array([a2[1]]),
        np.array([b2[0]]), np.array([b2[1]]),
        np.array([L2]),
    )
    return float(L1 * (gw @ inner[:, 0]))


def assemble_V(mesh, gauss_order=16):
    """P0 x P0 single-layer Galerkin matrix (symmetric by construction)."""
    return _assemble_V_geom(boundary_geometry(mesh), gauss_order)


def _assemble_V_geom(geom, gauss_order=16):
    n = geom.n_panels
    gx, gw = _gauss01(gauss_order)
    ng = gx.shape[0]
    obs = geom.tails[:, None, :] + gx[None, :, None] * (
        geom.heads - geom.tails
    )[:, None, :]
    px = obs[:, :, 0].ravel()
    py = obs[:, :, 1].ravel()
    inner = kern.sl_inner(
        px, py,
        geom.tails[:, 0].copy(), geom.tails[:, 1].copy(),
        geom.heads[:, 0].copy(), geom.heads[:, 1].copy(),
        geom.lengths.copy(),
    )
    V = geom.lengths[:, None] * np.einsum(
        "g,igj->ij", gw, inner.reshape(n, ng, n)
    )
    # force exact symmetry: keep the upper triangle
    V = np.triu(V, 1)
    V = V + V.T

    # diagonal: exact closed form
    L = geom.lengths
    np.fill_diagonal(V, L * L * (1.5 - np.log(L)) / _TWO_PI)

    touch, collinear = _classify_pairs(geom)
    for i, j in collinear:
        t1 = geom.tangents[i]
        s2 = float(np.dot(geom.tails[j] - geom.tails[i], t1))
        e2 = float(np.dot(geom.heads[j] - geom.tails[i], t1))
        val = _collinear_sl(
            0.0, float(geom.lengths[i]), min(s2, e2), max(s2, e2)
        )
        V[i, j] = V[j, i] = val
    for i, j, shared in touch:
        V[i, j] = V[j, i] = _touching_sl(geom, i, j, shared, gauss_order)
    return V


def _touching_sl(geom, i, j, shared_node, gauss_order):
    toward_start = shared_node == i  # shared vertex at tail of panel i
    gx, gw = _graded01(gauss_order, toward_start=toward_start)
    obs = geom.tails[i][None, :] + gx[:, None] * (
        geom.heads[i] - geom.tails[i]
    )[None, :]
    inner = kern.sl_inner(
        obs[:, 0].copy(), obs[:, 1].copy(),
        geom.tails[j : j + 1, 0].copy(), geom.tails[j : j + 1, 1].copy(),
        geom.heads[j : j + 1, 0].copy(), geom.heads[j : j + 1, 1].copy(),
        geom.lengths[j : j + 1].copy(),
    )
    return float(geom.lengths[i] * (gw @ inner[:, 0]))


def assemble_K(mesh, gauss_order=16):
    """P0 (test) x P1 (trial) double-layer Galerkin matrix."""
    return _assemble_K_geom(boundary_geometry(mesh), gauss_order)


def _assemble_K_geom(geom, gauss_order=16):
    n = geom.n_panels
    gx, gw = _gauss01(gauss_order)
    ng = gx.shape[0]
    obs = geom.tails[:, None, :] + gx[None, :, None] * (
        geom.heads - geom.tails
    )[:, None, :]
    px = obs[:, :, 0].ravel()
    py = obs[:, :, 1].ravel()
    tail_w, head_w = kern.dl_inner_p1(
        px, py,
        geom.tails[:, 0].copy(), geom.tails[:, 1].copy(),
        geom.heads[:, 0].copy(), geom.heads[:, 1].copy(),
        geom.lengths.copy(),
    )
    tail_int = geom.lengths[:, None] * np.einsum(
        "g,igj->ij", gw, tail_w.reshape(n, ng, n)
    )
    head_int = geom.lengths[:, None] * np.einsum(
        "g,igj->ij", gw, head_w.reshape(n, ng, n)
    )

    touch, collinear = _classify_pairs(geom)
    for i, j in collinear:
        tail_int[i, j] = head_int[i, j] = 0.0
        tail_int[j, i] = head_int[j, i] = 0.0
    for i, j, shared in touch:
        tail_int[i, j], head_int[i, j] = _touching_dl(
            geom, i, j, shared, gauss_order
        )
        tail_int[j, i], head_int[j, i] = _touching_dl(
            geom, j, i, shared, gauss_order
        )
    # self panels are collinear with themselves: exact zero
    np.fill_diagonal(tail_int, 0.0)
    np.fill_diagonal(head_int, 0.0)

    K = np.zeros((n, n))
    cols = np.arange(n)
    np.add.at(K, (slice(None), cols), tail_int)
    np.add.at(K, (slice(None), (cols + 1) % n), head_int)
    return K


def _touching_dl(geom, i, j, shared_node, gauss_order):
    toward_start = shared_node == i
    gx, gw = _graded01(gauss_order, toward_start=toward_start)
    obs = geom.tails[i][None, :] + gx[:, None] * (
        geom.heads[i] - geom.tails[i]
    )[None, :]
    tail_w, head_w = kern.dl_inner_p1(
        obs[:, 0].copy(), obs[:, 1].copy(),
        geom.tails[j : j + 1, 0].copy(), geom.tails[j : j + 1, 1].copy(),
        geom.heads[j : j + 1, 0].copy(), geom.heads[j : j + 1, 1].copy(),
        geom.lengths[j : j + 1].copy(),
    )
    Li = float(geom.lengths[i])
    return Li * float(gw @ tail_w[:, 0]), Li * float(gw @ head_w[:, 0])


def _tangential_derivative(geom):
    """P1 -> P0 edgewise d/ds matrix on the closed loop (kills constants)."""
    n = geom.n_panels
    D = np.zeros((n, n))
    rows = np.arange(n)
    D[rows, rows] = -1.0 / geom.lengths
    D[rows, (rows + 1) % n] = 1.0 / geom.lengths
    return D


def assemble_W(mesh, gauss_order=16, V=None):
    """Hypersingular Galerkin matrix via integration by parts, W = D^T V D."""
    geom = boundary_geometry(mesh)
    if V is None:
        V = _assemble_V_geom(geom, gauss_order)
    D = _tangential_derivative(geom)
    return D.T @ V @ D


def _p0p1_mass(geom):
    n = geom.n_panels
    M = np.zeros((n, n))
    rows = np.arange(n)
    half = geom.lengths / 2.0
    M[rows, rows] += half
    M[rows, (rows + 1) % n] += half
    return M


@dataclass(frozen=True)
class BoundaryOperatorSet:
    V: np.ndarray
    K: np.ndarray
    W: np.ndarray
    M: np.ndarray
    geometry: BoundaryGeometry


def boundary_operator_set(mesh, gauss_order=16):
    """Assemble V, K, W and the P0xP1 mass in one pass (V shared with W)."""
    geom = boundary_geometry(mesh)
    V = _assemble_V_geom(geom, gauss_order)
    K = _assemble_K_geom(geom, gauss_order)
    D = _tangential_derivative(geom)
    W = D.T @ V @ D
    return BoundaryOperatorSet(V=V, K=K, W=W, M=_p0p1_mass(geom), geometry=geom)


@dataclass(frozen=True)
class SteklovOperator:
    """Discrete exterior Dirichlet-to-Neumann form on boundary P1 dofs."""

    S: np.ndarray
    ops: BoundaryOperatorSet
    cho: tuple                      # Cholesky factor of V for reuse
    B: np.ndarray                   # M/2 - K

    @property
    def geometry(self):
        return self.ops.geometry


def build_steklov(ops):
    cho = sla.cho_factor(ops.V, lower=True)
    B = 0.5 * ops.M - ops.K
    S = ops.W + B.T @ sla.cho_solve(cho, B)
    S = 0.5 * (S + S.T)
    return SteklovOperator(S=S, ops=ops, cho=cho, B=B)


def boundary_p1_mass(geom, labels=None):
    """P1 mass matrix on the boundary loop; optionally only labeled edges."""
    n = geom.n_panels
    M = np.zeros((n, n))
    rows = np.arange(n)
    heads = (rows + 1) % n
    use = np.ones(n, dtype=bool)
    if labels is not None:
        use = np.array([lab in labels for lab in geom.labels])
    L = np.where(use, geom.lengths, 0.0)
    np.add.at(M, (rows, rows), L / 3.0)
    np.add.at(M, (heads, heads), L / 3.0)
    np.add.at(M, (rows, heads), L / 6.0)
    np.add.at(M, (heads, rows), L / 6.0)
    return M


def boundary_p1_load(geom, t0, gauss_order=8):
    """P1 load vector of a boundary flux density, ell_l = int t0 phi_l ds.

    t0 is called as t0(x, y, nx, ny) with the outward panel normal.
    """
    gx, gw = _gauss01(gauss_order)
    n = geom.n_panels
    out = np.zeros(n)
    pts = geom.tails[:, None, :] + gx[None, :, None] * (
        geom.heads - geom.tails
    )[:, None, :]
    nx = np.broadcast_to(geom.normals[:, None, 0], (n, gx.size))
    ny = np.broadcast_to(geom.normals[:, None, 1], (n, gx.size))
    vals = np.asarray(
        t0(pts[:, :, 0], pts[:, :, 1], nx, ny), dtype=np.float64
    )
    tail_contrib = geom.lengths * ((vals * (1.0 - gx)[None, :]) @ gw)
    head_contrib = geom.lengths * ((vals * gx[None, :]) @ gw)
    rows = np.arange(n)
    np.add.at(out, rows, tail_contrib)
    np.add.at(out, (rows + 1) % n, head_contrib)
    return out


def l2_coercivity_constant(steklov, geom=None):
    """Smallest generalized eigenvalue of (S_h, boundary P1 mass).

    This is the discrete L2 coercivity constant of the Steklov form; it is
    mesh-stable and bounds the admissible one-sided constant of the
    friction density for uniqueness.
    """
    g = geom if geom is not None else steklov.geometry
    M1 = boundary_p1_mass(g)
    vals = sla.eigh(steklov.S, M1, eigvals_only=True)
    return float(vals[0])


def exterior_neumann_data(steklov, g_nodal):
    """P0 approximation of the exterior normal derivative for trace data g."""
    g = np.asarray(g_nodal, dtype=np.float64)
    return -sla.cho_solve(steklov.cho, steklov.B @ g)


def reconstruct_exterior(geom, g_nodal, psi_panels, points, a=0.0):
    """Evaluate the exterior representation formula at given points.

    u(x) = (double layer of the P1 trace g) - (single layer of the P0
    density psi) + a.  Points must lie strictly outside, farther from the
    boundary than the nearest panel's length.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    g = np.asarray(g_nodal, dtype=np.float64)
    psi = np.asarray(psi_panels, dtype=np.float64)
    n = geom.n_panels

    d = _point_panel_distances(geom, pts)
    near = d.argmin(axis=1)
    dmin = d[np.arange(pts.shape[0]), near]
    bad = dmin <= geom.lengths[near]
    if bad.any():
        k = int(np.where(bad)[0][0])
        raise ValueError(
            f"point {tuple(pts[k])} is too close to the boundary "
            f"(distance {dmin[k]:.4g} <= panel length {geom.lengths[near[k]]:.4g})"
        )

    tail_w, head_w = kern.dl_inner_p1(
        pts[:, 0].copy(), pts[:, 1].copy(),
        geom.tails[:, 0].copy(), geom.tails[:, 1].copy(),
        geom.heads[:, 0].copy(), geom.heads[:, 1].copy(),
        geom.lengths.copy(),
    )
    cols = np.arange(n)
    dl = tail_w @ g[cols] + head_w @ g[(cols + 1) % n]
    sl = kern.sl_inner(
        pts[:, 0].copy(), pts[:, 1].copy(),
        geom.tails[:, 0].copy(), geom.tails[:, 1].copy(),
        geom.heads[:, 0].copy(), geom.heads[:, 1].copy(),
        geom.lengths.copy(),
    ) @ psi
    return dl - sl + a


def _point_panel_distances(geom, pts):
    ab = geom.heads - geom.tails
    L2 = (ab * ab).sum(axis=1)
    ap = pts[:, None, :] - geom.tails[None, :, :]
    t = np.clip((ap * ab[None, :, :]).sum(axis=2) / L2[None, :], 0.0, 1.0)
    proj = geom.tails[None, :, :] + t[:, :, None] * ab[None, :, :]
    return np.linalg.norm(pts[:, None, :] - proj, axis=2)


def write_operator(path, A):
    """Binary dump: 16-byte header (magic "bemops v1", u16 rows, u16 cols),
    then row-major little-endian float64."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    rows, cols = A.shape
    if rows > 0xFFFF or cols > 0xFFFF:
        raise ValueError("operator too large for the dump format")
    header = _MAGIC + b"\x00" + struct.pack("<HH", rows, cols) + b"\x00\x00"
    assert len(header) == 16
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(A.astype("<f8").tobytes(order="C"))


def read_operator(path):
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:9] != _MAGIC or header[9] != 0:
            raise ValueError(f"{path}: not a bemops v1 dump")
        rows, cols = struct.unpack("<HH", header[10:14])
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != rows * cols:
        raise ValueError(f"{path}: payload size mismatch")
    return data.reshape(rows, cols).astype(np.float64)
