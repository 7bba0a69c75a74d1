"""Conforming P1 triangle meshes of polygons with labeled boundary.

Boundary edges carry an S/T label (friction part / plain transmission
part).  Meshes are built CCW: positive triangle areas, boundary edges in
counterclockwise loop order starting at the first polygon vertex, outward
normals to the right of the traversal direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Mesh2D",
    "DualPartition",
    "MeshFormatError",
    "build_polygon_mesh",
    "refine_uniform",
    "refine_uniform_with_map",
    "prolongate",
    "dual_partition",
    "interpolate_pc",
    "read_mesh",
    "write_mesh",
    "quasi_uniformity_ratio",
    "triangle_areas",
    "triangle_diameters",
]


class MeshFormatError(ValueError):
    """Raised on malformed mesh files; carries the offending line number."""

    def __init__(self, lineno, msg):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass(frozen=True)
class Mesh2D:
    """Triangle mesh with labeled boundary edges.

    vertices        (n, 2) float64
    triangles       (m, 3) int64, CCW
    boundary_edges  (b, 2) int64, CCW loop order, edge k runs tail->head
    boundary_labels length-b list of "S"/"T"
    h               max triangle diameter
    level           refinement generation (0 for freshly built meshes)
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_labels: tuple
    h: float
    level: int = 0

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    @property
    def n_boundary_edges(self):
        return self.boundary_edges.shape[0]

    def boundary_loop(self):
        """Boundary node ids in CCW traversal order (tails of the edges)."""
        return self.boundary_edges[:, 0].copy()

    def edge_lengths(self):
        a = self.vertices[self.boundary_edges[:, 0]]
        b = self.vertices[self.boundary_edges[:, 1]]
        return np.linalg.norm(b - a, axis=1)


@dataclass
class DualPartition:
    """Midpoint-based dual cells on the friction boundary part.

    One cell per P1 node of the S-labeled arcs.  An arc-interior node owns
    the adjacent halves of its two incident S edges; an arc endpoint owns a
    single half edge.  `s` is the node's arc-length coordinate along the
    whole boundary loop (anchor: loop start), which is refinement-invariant.
    """

    node_ids: np.ndarray
    s: np.ndarray
    lengths: np.ndarray
    free: np.ndarray                     # True for arc-interior nodes
    pieces: list = field(repr=False, default_factory=list)

    @property
    def n_cells(self):
        return self.node_ids.shape[0]

    @property
    def total_length(self):
        return float(self.lengths.sum())


def triangle_areas(vertices, triangles):
    p0 = vertices[triangles[:, 0]]
    p1 = vertices[triangles[:, 1]]
    p2 = vertices[triangles[:, 2]]
    return 0.5 * (
        (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
        - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1])
    )


def triangle_diameters(vertices, triangles):
    p0 = vertices[triangles[:, 0]]
    p1 = vertices[triangles[:, 1]]
    p2 = vertices[triangles[:, 2]]
    e01 = np.linalg.norm(p1 - p0, axis=1)
    e12 = np.linalg.norm(p2 - p1, axis=1)
    e20 = np.linalg.norm(p0 - p2, axis=1)
    return np.maximum(e01, np.maximum(e12, e20))


def quasi_uniformity_ratio(mesh):
    d = triangle_diameters(mesh.vertices, mesh.triangles)
    return float(d.max() / d.min())


def _validate(mesh):
    areas = triangle_areas(mesh.vertices, mesh.triangles)
    if not np.all(areas > 0.0):
        raise ValueError("mesh has non-positive triangle areas")
    # boundary edges must be exactly the triangle edges used once
    seen = {}
    for tri in mesh.triangles:
        for a, b in ((0, 1), (1, 2), (2, 0)):
            key = (min(tri[a], tri[b]), max(tri[a], tri[b]))
            seen[key] = seen.get(key, 0) + 1
    free = {k for k, c in seen.items() if c == 1}
    declared = {
        (min(i, j), max(i, j)) for i, j in map(tuple, mesh.boundary_edges)
    }
    if free != declared:
        raise ValueError("boundary edges do not match triangulation boundary")
    # CCW loop: head of edge k is tail of edge k+1
    heads = mesh.boundary_edges[:, 1]
    tails = np.roll(mesh.boundary_edges[:, 0], -1)
    if not np.array_equal(heads, tails):
        raise ValueError("boundary edges are not in loop order")
    for lab in mesh.boundary_labels:
        if lab not in ("S", "T"):
            raise ValueError(f"bad boundary label {lab!r}")
    return mesh


def _segments_properly_intersect(p1, p2, p3, p4):
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if v == 0 else (1 if v > 0 else -1)

    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    return d1 != d2 and d3 != d4 and 0 not in (d1, d2, d3, d4)


def _check_simple_polygon(poly):
    n = len(poly)
    if n < 3:
        raise ValueError("polygon needs at least 3 vertices")
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_properly_intersect(
                poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]
            ):
                raise ValueError("non-simple polygon")
    area2 = 0.0
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        area2 += x1 * y2 - x2 * y1
    if area2 <= 0.0:
        raise ValueError("polygon must be CCW with positive area")


def _point_in_triangle(pt, a, b, c, tol):
    def cross(o, p, q):
        return (p[0] - o[0]) * (q[1] - o[1]) - (p[1] - o[1]) * (q[0] - o[0])

    return (
        cross(a, b, pt) >= -tol
        and cross(b, c, pt) >= -tol
        and cross(c, a, pt) >= -tol
    )


def _ear_clip(poly):
    """Triangulate a simple CCW polygon by ear clipping; returns index triples."""
    n = len(poly)
    scale = max(abs(v) for pt in poly for v in pt) or 1.0
    tol = 1e-14 * scale * scale
    ids = list(range(n))
    tris = []
    guard = 0
    while len(ids) > 3:
        guard += 1
        if guard > 2 * n * n:
            raise ValueError("ear clipping failed (degenerate polygon?)")
        clipped = False
        for k in range(len(ids)):
            ip, ic, inx = ids[k - 1], ids[k], ids[(k + 1) % len(ids)]
            a, b, c = poly[ip], poly[ic], poly[inx]
            cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if cross <= tol:
                continue
            ok = True
            for other in ids:
                if other in (ip, ic, inx):
                    continue
                if _point_in_triangle(poly[other], a, b, c, tol):
                    ok = False
                    break
            if ok:
                tris.append((ip, ic, inx))
                ids.pop(k)
                clipped = True
                break
        if not clipped:
            raise ValueError("ear clipping failed (non-simple polygon?)")
    tris.append(tuple(ids))
    return tris


def _is_axis_rectangle(poly):
    if len(poly) != 4:
        return False
    for i in range(4):
        dx = poly[(i + 1) % 4][0] - poly[i][0]
        dy = poly[(i + 1) % 4][1] - poly[i][1]
        if dx != 0.0 and dy != 0.0:
            return False
    return True


def _structured_rectangle(poly, h_target, labels):
    xs = [p[0] for p in poly]
    ys = [p[1] for p in poly]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    leg = h_target / math.sqrt(2.0)
    nx = max(1, math.ceil((x1 - x0) / leg))
    ny = max(1, math.ceil((y1 - y0) / leg))
    xg = np.linspace(x0, x1, nx + 1)
    yg = np.linspace(y0, y1, ny + 1)
    verts = np.column_stack(
        [np.tile(xg, ny + 1), np.repeat(yg, nx + 1)]
    )

    def vid(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(ny):
        for i in range(nx):
            tris.append((vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)))
            tris.append((vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)))

    # geometric side -> label, via the polygon's own sides
    side_label = {}
    for k in range(4):
        (ax, ay), (bx, by) = poly[k], poly[(k + 1) % 4]
        if ay == by == y0:
            side_label["bottom"] = labels[k]
        elif ax == bx == x1:
            side_label["right"] = labels[k]
        elif ay == by == y1:
            side_label["top"] = labels[k]
        else:
            side_label["left"] = labels[k]

    bedges = []
    blabels = []
    for i in range(nx):
        bedges.append((vid(i, 0), vid(i + 1, 0)))
        blabels.append(side_label["bottom"])
    for j in range(ny):
        bedges.append((vid(nx, j), vid(nx, j + 1)))
        blabels.append(side_label["right"])
    for i in range(nx, 0, -1):
        bedges.append((vid(i, ny), vid(i - 1, ny)))
        blabels.append(side_label["top"])
    for j in range(ny, 0, -1):
        bedges.append((vid(0, j), vid(0, j - 1)))
        blabels.append(side_label["left"])

    # rotate the loop so it starts at the first polygon vertex
    p0 = poly[0]
    start = None
    for k, (i, _) in enumerate(bedges):
        if verts[i, 0] == p0[0] and verts[i, 1] == p0[1]:
            start = k
            break
    bedges = bedges[start:] + bedges[:start]
    blabels = blabels[start:] + blabels[:start]
    return verts, np.array(tris, dtype=np.int64), bedges, blabels


def build_polygon_mesh(polygon, h_target, labels):
    """Mesh a simple CCW polygon; boundary side k inherits labels[k].

    Axis-aligned rectangles get a structured grid; general polygons are ear
    clipped and red-refined until every triangle diameter is <= h_target.
    """
    poly = [(float(x), float(y)) for x, y in polygon]
    _check_simple_polygon(poly)
    if len(labels) != len(poly):
        raise ValueError("need one S/T label per polygon side")
    labels = [str(l) for l in labels]
    for lab in labels:
        if lab not in ("S", "T"):
            raise ValueError(f"bad boundary label {lab!r}")
    if "S" not in labels or "T" not in labels:
        raise ValueError("both S and T boundary parts must be nonempty")
    if h_target <= 0.0:
        raise ValueError("h_target must be positive")

    if _is_axis_rectangle(poly):
        verts, tris, bedges, blabels = _structured_rectangle(
            poly, h_target, labels
        )
    else:
        tri_ids = _ear_clip(poly)
        verts = np.array(poly)
        tris = np.array(tri_ids, dtype=np.int64)
        bedges = [(k, (k + 1) % len(poly)) for k in range(len(poly))]
        blabels = list(labels)

    mesh = Mesh2D(
        vertices=np.asarray(verts, dtype=np.float64),
        triangles=np.asarray(tris, dtype=np.int64),
        boundary_edges=np.array(bedges, dtype=np.int64),
        boundary_labels=tuple(blabels),
        h=float(triangle_diameters(verts, np.asarray(tris)).max()),
        level=0,
    )
    _validate(mesh)
    while mesh.h > h_target:
        mesh = refine_uniform(mesh)
        mesh = Mesh2D(
            vertices=mesh.vertices,
            triangles=mesh.triangles,
            boundary_edges=mesh.boundary_edges,
            boundary_labels=mesh.boundary_labels,
            h=mesh.h,
            level=0,
        )
    return mesh


def refine_uniform(mesh):
    """Red refinement: every triangle into four similar children."""
    fine, _ = refine_uniform_with_map(mesh)
    return fine


def refine_uniform_with_map(mesh):
    """Red refinement plus the parent-edge map of the new vertices.

    Returns (fine_mesh, pairs) where fine vertex `n_coarse + k` is the
    midpoint of coarse vertices pairs[k]; parent vertices keep their ids,
    so P1 prolongation is a copy plus endpoint averaging.
    """
    verts = [tuple(v) for v in mesh.vertices]
    midpoint = {}

    def mid(i, j):
        key = (min(i, j), max(i, j))
        k = midpoint.get(key)
        if k is None:
            k = len(verts)
            vi = mesh.vertices[i]
            vj = mesh.vertices[j]
            verts.append(((vi[0] + vj[0]) / 2.0, (vi[1] + vj[1]) / 2.0))
            midpoint[key] = k
        return k

    tris = []
    for a, b, c in mesh.triangles:
        mab, mbc, mca = mid(a, b), mid(b, c), mid(c, a)
        tris.extend(
            [(a, mab, mca), (mab, b, mbc), (mca, mbc, c), (mab, mbc, mca)]
        )

    bedges = []
    blabels = []
    for (i, j), lab in zip(mesh.boundary_edges, mesh.boundary_labels):
        m = midpoint[(min(i, j), max(i, j))]
        bedges.extend([(i, m), (m, j)])
        blabels.extend([lab, lab])

    verts = np.array(verts)
    tris = np.array(tris, dtype=np.int64)
    out = Mesh2D(
        vertices=verts,
        triangles=tris,
        boundary_edges=np.array(bedges, dtype=np.int64),
        boundary_labels=tuple(blabels),
        h=float(triangle_diameters(verts, tris).max()),
        level=mesh.level + 1,
    )
    pairs = np.empty((len(midpoint), 2), dtype=np.int64)
    for (i, j), k in midpoint.items():
        pairs[k - mesh.n_vertices] = (i, j)
    return _validate(out), pairs


def prolongate(u_coarse, pairs):
    """P1 interpolation of coarse nodal values onto the red-refined mesh."""
    u = np.asarray(u_coarse, dtype=np.float64)
    return np.concatenate([u, 0.5 * (u[pairs[:, 0]] + u[pairs[:, 1]])])


def _arc_coordinates(mesh):
    """Arc-length coordinate of each boundary node along the loop."""
    lens = mesh.edge_lengths()
    s = np.concatenate([[0.0], np.cumsum(lens)[:-1]])
    return dict(zip(mesh.boundary_edges[:, 0], s))


def dual_partition(mesh):
    """Dual cells of the S-labeled boundary part (one per P1 node on it)."""
    labs = np.array([lab == "S" for lab in mesh.boundary_labels])
    if not labs.any():
        raise ValueError("mesh has no S-labeled boundary edges")
    node_s = _arc_coordinates(mesh)
    lens = mesh.edge_lengths()
    verts = mesh.vertices

    # per-node bookkeeping, in boundary loop order for determinism
    order = []
    half = {}
    pieces = {}
    incid = {}
    for k, (i, j) in enumerate(mesh.boundary_edges):
        if not labs[k]:
            continue
        a, b = verts[i], verts[j]
        m = (a + b) / 2.0
        for node, seg in ((int(i), (a, m)), (int(j), (m, b))):
            if node not in half:
                order.append(node)
                half[node] = 0.0
                pieces[node] = []
                incid[node] = 0
            half[node] += lens[k] / 2.0
            pieces[node].append(np.array(seg))
            incid[node] += 1

    node_ids = np.array(order, dtype=np.int64)
    return DualPartition(
        node_ids=node_ids,
        s=np.array([node_s[n] for n in order]),
        lengths=np.array([half[n] for n in order]),
        free=np.array([incid[n] == 2 for n in order]),
        pieces=[pieces[n] for n in order],
    )


def interpolate_pc(v_nodal, dual):
    """Piecewise-constant interpolation onto the dual cells.

    The cell value is the nodal value, so this is a validated copy keyed to
    the cells of `dual` (idempotent by construction).
    """
    v = np.asarray(v_nodal, dtype=np.float64)
    if v.shape != (dual.n_cells,):
        raise ValueError(
            f"expected {dual.n_cells} nodal values, got shape {v.shape}"
        )
    return v.copy()


def write_mesh(mesh, path):
    """Plain-text dump, format "mesh2d v1"; floats via repr (round-trip exact)."""
    lines = ["mesh2d v1"]
    lines.append(f"vertices {mesh.n_vertices}")
    for x, y in mesh.vertices:
        lines.append(f"{float(x)!r} {float(y)!r}")
    lines.append(f"triangles {mesh.n_triangles}")
    for a, b, c in mesh.triangles:
        lines.append(f"{a} {b} {c}")
    lines.append(f"bedges {mesh.n_boundary_edges}")
    for (i, j), lab in zip(mesh.boundary_edges, mesh.boundary_labels):
        lines.append(f"{i} {j} {lab}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path):
    """Strict reader for the "mesh2d v1" format."""
    with open(path) as fh:
        raw = fh.read().splitlines()

    pos = 0

    def take(expect_tokens=None):
        nonlocal pos
        if pos >= len(raw):
            raise MeshFormatError(pos + 1, "unexpected end of file")
        line = raw[pos]
        pos += 1
        toks = line.split()
        if expect_tokens is not None and len(toks) != expect_tokens:
            raise MeshFormatError(
                pos, f"expected {expect_tokens} tokens, got {len(toks)}"
            )
        return toks

    if take() != ["mesh2d", "v1"]:
        raise MeshFormatError(1, 'bad header (want "mesh2d v1")')

    def count(section):
        toks = take(2)
        if toks[0] != section:
            raise MeshFormatError(pos, f'expected "{section} N"')
        try:
            n = int(toks[1])
        except ValueError:
            raise MeshFormatError(pos, f"bad count {toks[1]!r}") from None
        if n < 0:
            raise MeshFormatError(pos, "negative count")
        return n

    nv = count("vertices")
    verts = np.empty((nv, 2))
    for k in range(nv):
        toks = take(2)
        try:
            verts[k] = (float(toks[0]), float(toks[1]))
        except ValueError:
            raise MeshFormatError(pos, "bad vertex coordinates") from None

    nt = count("triangles")
    tris = np.empty((nt, 3), dtype=np.int64)
    for k in range(nt):
        toks = take(3)
        try:
            tris[k] = [int(t) for t in toks]
        except ValueError:
            raise MeshFormatError(pos, "bad triangle indices") from None
        if tris[k].min() < 0 or tris[k].max() >= nv:
            raise MeshFormatError(pos, "triangle index out of range")

    nb = count("bedges")
    bedges = np.empty((nb, 2), dtype=np.int64)
    blabels = []
    for k in range(nb):
        toks = take(3)
        try:
            bedges[k] = (int(toks[0]), int(toks[1]))
        except ValueError:
            raise MeshFormatError(pos, "bad boundary edge indices") from None
        if bedges[k].min() < 0 or bedges[k].max() >= nv:
            raise MeshFormatError(pos, "boundary edge index out of range")
        if toks[2] not in ("S", "T"):
            raise MeshFormatError(pos, f"bad label {toks[2]!r}")
        blabels.append(toks[2])

    if pos != len(raw) and any(l.strip() for l in raw[pos:]):
        raise MeshFormatError(pos + 1, "trailing content")

    mesh = Mesh2D(
        vertices=verts,
        triangles=tris,
        boundary_edges=bedges,
        boundary_labels=tuple(blabels),
        h=float(triangle_diameters(verts, tris).max()) if nt else 0.0,
        level=0,
    )
    return _validate(mesh)
