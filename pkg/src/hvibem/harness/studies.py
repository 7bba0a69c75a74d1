"""Convergence studies and report writers.

h-studies solve on nested red refinements at fixed smoothing width;
eps-studies solve a decreasing smoothing schedule on one mesh with warm
starts.  Cases with an exact solution are measured against it; the rest
fall back to level-to-level (or eps-to-eps) differences in the discrete
energy norm.  CSV output carries no timestamps so reruns are
byte-identical; run metadata lives in the JSON sidecar.
"""

from __future__ import annotations

import datetime as _dt
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import __version__, bem
from .._kernels import backend_name
from ..mesh import build_polygon_mesh, prolongate, refine_uniform_with_map
from ..smoothing import SmoothingParams
from ..solver import (
    NewtonFailure,
    SolverConfig,
    assemble_system,
    e_norm,
    solve_newton,
)

__all__ = [
    "CSV_COLUMNS",
    "PROBE_OFFSETS",
    "StudyReport",
    "StudyRow",
    "build_case_mesh",
    "run_eps_study",
    "run_h_study",
    "solve_case",
    "write_csv",
    "write_json",
]

CSV_COLUMNS = (
    "level",
    "h",
    "eps",
    "dofs",
    "newton_iters",
    "residual",
    "energy",
    "err_h1_interior",
    "err_l2_boundary",
    "err_exterior_max",
)

# exterior probe points in units of the polygon scale
PROBE_OFFSETS = (
    (1.25, 0.0),
    (0.0, 1.75),
    (-1.5, 0.75),
    (1.0, -1.5),
    (-1.25, -1.25),
)


@dataclass
class StudyRow:
    level: int
    h: float
    eps: float
    dofs: int
    newton_iters: int
    residual: float
    energy: float
    err_h1_interior: float
    err_l2_boundary: float
    err_exterior_max: float
    exterior_point_errors: tuple
    diff_enorm: float
    converged: bool
    uniqueness_ok: bool


@dataclass
class StudyReport:
    case: str
    kind: str                     # "h" or "eps"
    rows: list
    observed_orders: dict
    oracles: dict
    metadata: dict = field(default_factory=dict)


def build_case_mesh(case, h0, refinements):
    mesh = build_polygon_mesh(case.polygon, h0, list(case.labels))
    maps = []
    for _ in range(refinements):
        mesh, pairs = refine_uniform_with_map(mesh)
        maps.append(pairs)
    return mesh, maps


def solve_case(case, mesh, eps, tol=1e-10, max_iter=50, initial=None):
    """Assemble and solve one case on one mesh; returns (system, solution)."""
    params = SmoothingParams(eps)
    system = assemble_system(mesh, case.material, case.spec, params, case.data)
    cfg = SolverConfig(tol=tol, max_iter=max_iter)
    solution = solve_newton(system, cfg, initial=initial)
    return system, solution


def _probe_points(case):
    scale = _case_scale(case)
    return np.asarray(PROBE_OFFSETS, dtype=np.float64) * scale


def _case_scale(case):
    pts = np.asarray(case.polygon, dtype=np.float64)
    return float(np.abs(pts).max() * 2.0)


def _interior_error(system, mesh, case, u_h):
    exact = case.exact.interior(mesh.vertices[:, 0], mesh.vertices[:, 1])
    d = u_h - np.asarray(exact, dtype=np.float64)
    return float(np.sqrt(d @ (system.stiffness @ d) + d @ (system.mass @ d)))


def _boundary_error(system, case, v_h):
    geom = system.steklov.geometry
    ev = system.embed_v(v_h)
    exact = case.exact.v_boundary(system.friction.s)
    ex_b = np.zeros_like(ev)
    ex_b[system.vb] = np.asarray(exact, dtype=np.float64)[system.dual_free]
    d = ev - ex_b
    M1s = bem.boundary_p1_mass(geom, labels=("S",))
    return float(np.sqrt(d @ (M1s @ d)))


def _exterior_errors(system, case, u_h, v_h):
    geom = system.steklov.geometry
    gb = u_h[system.bids] + system.embed_v(v_h)
    u0_b = system.u0_b
    g_ext = gb - u0_b
    psi = bem.exterior_neumann_data(system.steklov, g_ext)
    pts = _probe_points(case)
    rec = bem.reconstruct_exterior(geom, g_ext, psi, pts, a=0.0)
    exact = case.exact.exterior(pts[:, 0], pts[:, 1])
    return tuple(float(e) for e in np.abs(rec - np.asarray(exact)))


def _nan_row(level, h, eps, dofs, history):
    return StudyRow(
        level=level,
        h=h,
        eps=eps,
        dofs=dofs,
        newton_iters=len(history) - 1,
        residual=float(history[-1]),
        energy=float("nan"),
        err_h1_interior=float("nan"),
        err_l2_boundary=float("nan"),
        err_exterior_max=float("nan"),
        exterior_point_errors=(),
        diff_enorm=float("nan"),
        converged=False,
        uniqueness_ok=False,
    )


def _ls_slope(xs, ys):
    """Least-squares slope of log(y) vs log(x) over usable points."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    keep = np.isfinite(ys) & (ys > 1e-14) & np.isfinite(xs) & (xs > 0)
    if keep.sum() < 3:
        return None
    return float(np.polyfit(np.log(xs[keep]), np.log(ys[keep]), 1)[0])


def run_h_study(case, levels, eps, h0=0.1, tol=1e-10, max_iter=50, config=None):
    """Solve on `levels` nested refinements at fixed eps; measure errors."""
    if levels < 3:
        raise ValueError("levels >= 3 required")
    meshes = []
    mesh = build_polygon_mesh(case.polygon, h0, list(case.labels))
    meshes.append((mesh, None))
    for _ in range(levels - 1):
        mesh, pairs = refine_uniform_with_map(mesh)
        meshes.append((mesh, pairs))

    params = SmoothingParams(eps)
    cfg = SolverConfig(tol=tol, max_iter=max_iter)
    rows = []
    solved = []
    for mesh, _ in meshes:
        system = assemble_system(mesh, case.material, case.spec, params, case.data)
        try:
            sol = solve_newton(system, cfg)
        except NewtonFailure as fail:
            rows.append(
                _nan_row(mesh.level, mesh.h, eps, system.n_dof, fail.history)
            )
            solved.append((system, None))
            continue
        row = StudyRow(
            level=mesh.level,
            h=mesh.h,
            eps=eps,
            dofs=system.n_dof,
            newton_iters=sol.iterations,
            residual=sol.residual_history[-1],
            energy=sol.energy,
            err_h1_interior=float("nan"),
            err_l2_boundary=float("nan"),
            err_exterior_max=float("nan"),
            exterior_point_errors=(),
            diff_enorm=float("nan"),
            converged=True,
            uniqueness_ok=sol.uniqueness_ok,
        )
        if case.exact is not None:
            row.err_h1_interior = _interior_error(system, mesh, case, sol.u)
            row.err_l2_boundary = _boundary_error(system, case, sol.v)
            row.exterior_point_errors = _exterior_errors(system, case, sol.u, sol.v)
            row.err_exterior_max = max(row.exterior_point_errors)
        rows.append(row)
        solved.append((system, sol))

    if case.exact is None:
        _fill_self_convergence(rows, solved, meshes)

    hs = [r.h for r in rows]
    orders = {
        "err_h1_interior": _ls_slope(hs, [r.err_h1_interior for r in rows]),
        "err_l2_boundary": _ls_slope(hs, [r.err_l2_boundary for r in rows]),
        "err_exterior_max": _ls_slope(hs, [r.err_exterior_max for r in rows]),
    }
    oracle = (
        "manufactured-solution" if case.exact is not None else "self-convergence"
    )
    oracles = {
        "err_h1_interior": oracle,
        "err_l2_boundary": oracle,
        "err_exterior_max": (
            "manufactured-solution" if case.exact is not None else "none"
        ),
    }
    return StudyReport(
        case=case.name,
        kind="h",
        rows=rows,
        observed_orders=orders,
        oracles=oracles,
        metadata=_metadata(case, config),
    )


def _fill_self_convergence(rows, solved, meshes):
    """Error proxy for exact-free cases: difference to the next refinement.

    The coarse solution is P1-prolongated onto the finer mesh; the interior
    column gets the H1 part, the boundary column the L2+Steklov part, and
    diff_enorm the combined norm.  The finest row keeps NaN.
    """
    for k in range(len(rows) - 1):
        sys_c, sol_c = solved[k]
        sys_f, sol_f = solved[k + 1]
        pairs = meshes[k + 1][1]
        if sol_c is None or sol_f is None:
            continue
        du = prolongate(sol_c.u, pairs) - sol_f.u
        w = np.zeros(sys_c.n_u)
        w[sys_c.bids] = sys_c.embed_v(sol_c.v)
        wv_f = prolongate(w, pairs)[sys_f.bids]
        ev = wv_f - sys_f.embed_v(sol_f.v)
        a = du @ (sys_f.stiffness @ du) + du @ (sys_f.mass @ du)
        M1s = bem.boundary_p1_mass(sys_f.steklov.geometry, labels=("S",))
        b = ev @ (M1s @ ev) + ev @ (sys_f.steklov.S @ ev)
        rows[k].err_h1_interior = float(np.sqrt(a))
        rows[k].err_l2_boundary = float(np.sqrt(b))
        rows[k].diff_enorm = float(np.sqrt(a + b))


def run_eps_study(case, eps_schedule, h_level=1, h0=0.1, tol=1e-10,
                  max_iter=50, config=None):
    """Fixed mesh, decreasing eps with warm starts; eps-to-eps differences."""
    schedule = [float(e) for e in eps_schedule]
    if len(schedule) < 3:
        raise ValueError("eps schedule needs >= 3 values")
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("eps schedule must be strictly decreasing")
    mesh, _ = build_case_mesh(case, h0, h_level)

    cfg = SolverConfig(tol=tol, max_iter=max_iter)
    rows = []
    sols = []
    system = None
    x_prev = None
    for eps in schedule:
        params = SmoothingParams(eps)
        system = assemble_system(mesh, case.material, case.spec, params, case.data)
        try:
            sol = solve_newton(system, cfg, initial=x_prev)
        except NewtonFailure as fail:
            rows.append(
                _nan_row(mesh.level, mesh.h, eps, system.n_dof, fail.history)
            )
            sols.append(None)
            continue
        x_prev = np.concatenate([sol.u, sol.v, [sol.multiplier]])
        rows.append(
            StudyRow(
                level=mesh.level,
                h=mesh.h,
                eps=eps,
                dofs=system.n_dof,
                newton_iters=sol.iterations,
                residual=sol.residual_history[-1],
                energy=sol.energy,
                err_h1_interior=float("nan"),
                err_l2_boundary=float("nan"),
                err_exterior_max=float("nan"),
                exterior_point_errors=(),
                diff_enorm=float("nan"),
                converged=True,
                uniqueness_ok=sol.uniqueness_ok,
            )
        )
        sols.append(sol)

    for k in range(len(rows) - 1):
        if sols[k] is None or sols[k + 1] is None:
            continue
        du = sols[k].u - sols[k + 1].u
        dv = sols[k].v - sols[k + 1].v
        a = du @ (system.stiffness @ du) + du @ (system.mass @ du)
        ev = system.embed_v(dv)
        M1s = bem.boundary_p1_mass(system.steklov.geometry, labels=("S",))
        b = ev @ (M1s @ ev) + ev @ (system.steklov.S @ ev)
        rows[k].err_h1_interior = float(np.sqrt(a))
        rows[k].err_l2_boundary = float(np.sqrt(b))
        rows[k].diff_enorm = float(e_norm(system, du, dv))

    orders = {
        "diff_enorm": _ls_slope(
            [r.eps for r in rows], [r.diff_enorm for r in rows]
        )
    }
    oracles = {
        "err_h1_interior": "self-convergence",
        "err_l2_boundary": "self-convergence",
        "err_exterior_max": "none",
        "diff_enorm": "self-convergence",
    }
    return StudyReport(
        case=case.name,
        kind="eps",
        rows=rows,
        observed_orders=orders,
        oracles=oracles,
        metadata=_metadata(case, config),
    )


def _metadata(case, config):
    return {
        "case": case.name,
        "material": case.material.name,
        "friction": case.friction_name,
        "friction_params": list(case.friction_params),
        "version": __version__,
        "backend": backend_name(),
        "config": dict(config) if config else {},
    }


def _fmt(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(report, path):
    """Stable schema, comma separator, shortest round-trip floats."""
    lines = [",".join(CSV_COLUMNS)]
    for row in report.rows:
        rec = asdict(row)
        lines.append(",".join(_fmt(rec[c]) for c in CSV_COLUMNS))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json(report, path):
    payload = {
        "case": report.case,
        "kind": report.kind,
        "columns": list(CSV_COLUMNS),
        "rows": [asdict(r) for r in report.rows],
        "observed_orders": report.observed_orders,
        "oracles": report.oracles,
        "metadata": dict(report.metadata),
        "written_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serializable: {type(obj)!r}")
