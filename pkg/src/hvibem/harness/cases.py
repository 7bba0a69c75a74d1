"""Problem catalog: manufactured and friction-driven benchmark cases.

The manufactured case pairs a harmonic interior field with a decaying
exterior dipole; data functions are reverse-engineered so the coupled
problem reproduces both fields and a zero boundary jump.  The friction
cases have no closed-form solution and are measured by self-convergence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import bem, fem, smoothing
from ..mesh import build_polygon_mesh, refine_uniform
from ..solver import ProblemData

__all__ = [
    "CaseSpec",
    "ExactSolution",
    "CheckResult",
    "ValidationReport",
    "case_names",
    "manufactured_case",
    "validate_case",
]

_CATALOG = ("dipole-linear", "tresca-square", "nonconvex-square", "zero-square")


@dataclass(frozen=True)
class ExactSolution:
    interior: object          # u1(x, y)
    interior_grad: object     # (u1_x, u1_y)(x, y)
    exterior: object          # u2(x, y), decaying at infinity
    exterior_grad: object
    v_boundary: object        # jump variable as a function of arc length


@dataclass(frozen=True)
class CaseSpec:
    name: str
    polygon: tuple
    labels: tuple
    material: object
    spec: object              # superpotential
    friction_name: str
    friction_params: tuple    # () when the law carries callables
    data: ProblemData
    exact: object             # ExactSolution or None
    compat_tol: float         # tolerance for the source/flux balance check


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    case: str
    checks: tuple

    @property
    def all_passed(self):
        return all(c.passed for c in self.checks)


def case_names():
    return _CATALOG


def _square(scale):
    a = scale / 2.0
    return ((-a, -a), (a, -a), (a, a), (-a, a))


def _polygon_arcs(polygon):
    pts = np.asarray(polygon, dtype=np.float64)
    d = np.roll(pts, -1, axis=0) - pts
    lens = np.hypot(d[:, 0], d[:, 1])
    nrm = np.stack([d[:, 1], -d[:, 0]], axis=1) / lens[:, None]
    breaks = np.concatenate([[0.0], np.cumsum(lens)])
    return breaks, nrm


def polygon_normal(polygon, s):
    """Outward unit normal at arc position s (measured from vertex 0)."""
    breaks, nrm = _polygon_arcs(polygon)
    s = np.atleast_1d(np.asarray(s, dtype=np.float64)) % breaks[-1]
    k = np.clip(np.searchsorted(breaks, s, side="right") - 1, 0, len(nrm) - 1)
    return nrm[k]


def manufactured_case(name, scale=0.4):
    if name not in _CATALOG:
        raise ValueError(f"unknown case {name!r}; catalog: {', '.join(_CATALOG)}")
    if name == "dipole-linear":
        return _dipole_linear(scale)
    if name == "tresca-square":
        return _tresca_square(scale)
    if name == "nonconvex-square":
        return _nonconvex_square(scale)
    return _zero_square(scale)


def _dipole_linear(scale):
    poly = _square(scale)
    z1, z2 = 0.125 * scale, -0.075 * scale

    def u1(x, y):
        return np.asarray(x, dtype=np.float64) + 0.0 * np.asarray(y)

    def grad_u1(x, y):
        x = np.asarray(x, dtype=np.float64)
        return np.ones_like(x), np.zeros_like(x)

    def u2(x, y):
        w1 = np.asarray(x, dtype=np.float64) - z1
        w2 = np.asarray(y, dtype=np.float64) - z2
        return w1 / (w1 * w1 + w2 * w2)

    def grad_u2(x, y):
        w1 = np.asarray(x, dtype=np.float64) - z1
        w2 = np.asarray(y, dtype=np.float64) - z2
        r2 = w1 * w1 + w2 * w2
        return (r2 - 2.0 * w1 * w1) / (r2 * r2), -2.0 * w1 * w2 / (r2 * r2)

    def t0(x, y, nx, ny):
        g1x, g1y = grad_u1(x, y)
        g2x, g2y = grad_u2(x, y)
        return (g1x - g2x) * nx + (g1y - g2y) * ny

    def u0(x, y):
        return u1(x, y) - u2(x, y)

    def q_of_s(s):
        # friction slope chosen as the interior normal flux of u1
        return polygon_normal(poly, s)[..., 0]

    def v_exact(s):
        return np.zeros_like(np.asarray(s, dtype=np.float64))

    return CaseSpec(
        name="dipole-linear",
        polygon=poly,
        labels=("T", "T", "T", "S"),
        material=fem.material_by_name("linear"),
        spec=smoothing.linear(q_of_s),
        friction_name="linear",
        friction_params=(),
        data=ProblemData(
            f0=lambda x, y: np.zeros_like(np.asarray(x, dtype=np.float64)),
            t0=t0,
            u0=u0,
        ),
        exact=ExactSolution(
            interior=u1,
            interior_grad=grad_u1,
            exterior=u2,
            exterior_grad=grad_u2,
            v_boundary=v_exact,
        ),
        compat_tol=1e-6,
    )


def _balanced_flux(scale):
    # constant exterior flux balancing f0 = 1 over the square
    area = scale * scale
    perimeter = 4.0 * scale
    c = -area / perimeter

    def t0(x, y, nx, ny):
        return c * np.ones_like(np.asarray(x, dtype=np.float64))

    return t0


def _tresca_square(scale):
    return CaseSpec(
        name="tresca-square",
        polygon=_square(scale),
        labels=("S", "T", "T", "T"),
        material=fem.material_by_name("shear-thinning"),
        spec=smoothing.tresca(1.0),
        friction_name="tresca",
        friction_params=(1.0,),
        data=ProblemData(
            f0=lambda x, y: np.ones_like(np.asarray(x, dtype=np.float64)),
            t0=_balanced_flux(scale),
            u0=lambda x, y: np.zeros_like(np.asarray(x, dtype=np.float64)),
        ),
        exact=None,
        compat_tol=1e-12,
    )


def _nonconvex_square(scale):
    return CaseSpec(
        name="nonconvex-square",
        polygon=_square(scale),
        labels=("S", "T", "T", "T"),
        material=fem.material_by_name("linear"),
        spec=smoothing.nonconvex(1.0, 1.0),
        friction_name="nonconvex",
        friction_params=(1.0, 1.0),
        data=ProblemData(
            f0=lambda x, y: np.ones_like(np.asarray(x, dtype=np.float64)),
            t0=_balanced_flux(scale),
            u0=lambda x, y: np.zeros_like(np.asarray(x, dtype=np.float64)),
        ),
        exact=None,
        compat_tol=1e-12,
    )


def _zero_square(scale):
    zero2 = lambda x, y: np.zeros_like(np.asarray(x, dtype=np.float64))

    def zero_grad(x, y):
        z = np.zeros_like(np.asarray(x, dtype=np.float64))
        return z, z

    return CaseSpec(
        name="zero-square",
        polygon=_square(scale),
        labels=("S", "T", "T", "T"),
        material=fem.material_by_name("linear"),
        spec=smoothing.linear(0.0),
        friction_name="linear",
        friction_params=(0.0,),
        data=ProblemData(
            f0=zero2,
            t0=lambda x, y, nx, ny: np.zeros_like(np.asarray(x, dtype=np.float64)),
            u0=zero2,
        ),
        exact=ExactSolution(
            interior=zero2,
            interior_grad=zero_grad,
            exterior=zero2,
            exterior_grad=zero_grad,
            v_boundary=lambda s: np.zeros_like(np.asarray(s, dtype=np.float64)),
        ),
        compat_tol=1e-12,
    )


def _boundary_samples(case, n=100):
    """n points on the polygon boundary, uniform in arc length, off corners."""
    breaks, nrm = _polygon_arcs(case.polygon)
    per = breaks[-1]
    s = (np.arange(n) + 0.37) * per / n
    pts = np.asarray(case.polygon, dtype=np.float64)
    seg = np.roll(pts, -1, axis=0) - pts
    k = np.clip(np.searchsorted(breaks, s, side="right") - 1, 0, len(seg) - 1)
    t = (s - breaks[k]) / np.hypot(seg[k, 0], seg[k, 1])
    xy = pts[k] + t[:, None] * seg[k]
    return s, xy, nrm[k]


def _label_at(case, s):
    breaks, _ = _polygon_arcs(case.polygon)
    k = np.clip(
        np.searchsorted(breaks, np.atleast_1d(s), side="right") - 1,
        0,
        len(case.labels) - 1,
    )
    return np.asarray([case.labels[i] for i in k])


def validate_case(case, eps=1e-3, h0=0.1):
    """Run the hypothesis validators and collect pass/fail results."""
    checks = []
    s_probe = np.linspace(0.05, 0.95, 7) * 4.0 * _side(case)

    growth = smoothing.validate_superpotential(
        case.spec, s_probe, np.linspace(-5.0, 5.0, 801)
    )
    checks.append(
        CheckResult(
            name="branch-growth-and-derivatives",
            passed=growth.ok,
            value=float(max(growth.measured_c)),
            detail=(
                f"measured c={[f'{c:.3g}' for c in growth.measured_c]} "
                f"d={[f'{d:.3g}' for d in growth.measured_d]}; "
                + ("; ".join(growth.messages) or "clean")
            ),
        )
    )

    params = smoothing.SmoothingParams(eps)
    try:
        gap = smoothing.smoothing_error_bound_check(
            case.spec, params, np.linspace(-5.0, 5.0, 4001)
        )
        checks.append(
            CheckResult(
                name="smoothing-gap-bound",
                passed=True,
                value=float(gap.max_gap),
                detail=f"max gap {gap.max_gap:.3e} vs bound {gap.bound:.3e}",
            )
        )
    except ValueError as exc:
        checks.append(
            CheckResult(
                name="smoothing-gap-bound",
                passed=False,
                value=float("nan"),
                detail=str(exc),
            )
        )

    mesh = build_polygon_mesh(case.polygon, h0, list(case.labels))
    mesh = refine_uniform(mesh)
    load = fem.assemble_load(mesh, case.data.f0)
    geom = bem.boundary_geometry(mesh)
    tvec = bem.boundary_p1_load(geom, case.data.t0)
    balance = float(load.sum() + tvec.sum())
    checks.append(
        CheckResult(
            name="source-flux-balance",
            passed=bool(abs(balance) <= case.compat_tol),
            value=balance,
            detail=f"integral f0 + integral t0 = {balance:.3e}",
        )
    )

    ops = bem.boundary_operator_set(mesh)
    steklov = bem.build_steklov(ops)
    c_disc = bem.l2_coercivity_constant(steklov)
    alpha = max(
        smoothing.estimate_onesided_constant(
            case.spec, params, (-5.0, 5.0), 801, s=float(sv)
        )
        for sv in np.linspace(0.1, 0.9, 5) * 4.0 * _side(case)
    )
    checks.append(
        CheckResult(
            name="onesided-constant-vs-coercivity",
            passed=bool(alpha < c_disc),
            value=float(alpha),
            detail=f"alpha_hat {alpha:.4f} vs coercivity {c_disc:.4f}",
        )
    )

    if case.exact is not None:
        checks.extend(_transmission_checks(case))
    return ValidationReport(case=case.name, checks=tuple(checks))


def _side(case):
    pts = np.asarray(case.polygon, dtype=np.float64)
    d = np.roll(pts, -1, axis=0) - pts
    return float(np.hypot(d[:, 0], d[:, 1]).max())


def _transmission_checks(case):
    s, xy, nrm = _boundary_samples(case, 100)
    x, y = xy[:, 0], xy[:, 1]
    nx, ny = nrm[:, 0], nrm[:, 1]
    ex = case.exact

    jump = ex.interior(x, y) - ex.exterior(x, y) - case.data.u0(x, y)
    g1x, g1y = ex.interior_grad(x, y)
    g2x, g2y = ex.exterior_grad(x, y)
    flux = (g1x - g2x) * nx + (g1y - g2y) * ny - case.data.t0(x, y, nx, ny)

    labels = _label_at(case, s)
    on_s = labels == "S"
    fr = np.zeros(1)
    if on_s.any():
        params = smoothing.SmoothingParams(1e-3)
        v = ex.v_boundary(s[on_s])
        slope, _ = smoothing.superpotential_slope(case.spec, params, s[on_s], v)
        fr = slope - (g1x[on_s] * nx[on_s] + g1y[on_s] * ny[on_s])
    out = [
        CheckResult(
            name="transmission-jump",
            passed=bool(np.max(np.abs(jump)) <= 1e-10),
            value=float(np.max(np.abs(jump))),
            detail="u_interior - u_exterior - u0 at 100 boundary points",
        ),
        CheckResult(
            name="transmission-flux",
            passed=bool(np.max(np.abs(flux)) <= 1e-10),
            value=float(np.max(np.abs(flux))),
            detail="normal flux jump minus t0 at 100 boundary points",
        ),
        CheckResult(
            name="friction-slope-consistency",
            passed=bool(np.max(np.abs(fr)) <= 1e-10),
            value=float(np.max(np.abs(fr))),
            detail="smoothed slope at the exact jump vs interior flux",
        ),
    ]
    return out
