"""Smoothing of max-of-smooth boundary superpotentials.

The nonsmooth density j(s, x) = max_i g_i(s, x) is regularized by the
plus-function recipe: replace max(a, b) = a + (b - a)^+ with a smoothed
plus function P(eps, .) and nest for m > 2 branches,

    jhat(s, eps, x) = g_1 + P(eps, g_2 - g_1 + P(eps, ... + P(eps, g_m - g_{m-1}))).

P comes from mollifying x^+ with the uniform density on [-1/2, 1/2]
(kappa = 1/4):

    P(eps, x) = 0                        for x < -eps/2
              = (x + eps/2)^2 / (2 eps)  for |x| <= eps/2
              = x                        for x > eps/2

which gives 0 <= jhat - j... the two-sided gap |jhat - j| <= (m-1) kappa eps.
The slope of jhat is a convex combination sum_i Lambda_i g_i' with
Lambda_i in [0, 1] summing to one; the weights are exposed because they
certify that slopes stay inside the Clarke gradient hull of the branch
derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SmoothingParams",
    "SuperpotentialSpec",
    "SmoothingGapReport",
    "GrowthReport",
    "plus_smooth",
    "plus_smooth_curvature",
    "superpotential_value",
    "superpotential_slope",
    "superpotential_curvature",
    "unsmoothed_value",
    "clarke_dirderiv",
    "smoothing_error_bound_check",
    "estimate_onesided_constant",
    "validate_superpotential",
    "tresca",
    "linear",
    "nonconvex",
    "superpotential_by_name",
]

KAPPA_ZANG = 0.25


@dataclass(frozen=True)
class SmoothingParams:
    """Regularization parameters: epsilon > 0, uniform ("zang") density."""

    epsilon: float
    density: str = "zang"

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.density != "zang":
            raise ValueError(f"unknown smoothing density {self.density!r}")

    @property
    def kappa(self):
        return KAPPA_ZANG

    def error_bound(self, m):
        """Uniform bound on |jhat - j| for an m-branch superpotential."""
        return (m - 1) * self.kappa * self.epsilon


@dataclass(frozen=True)
class SuperpotentialSpec:
    """Max-of-smooth boundary density.

    branches: tuple of (g, gx, gxx) callables of (s, x); gxx may be None
    (curvature then falls back to differencing the slope).  All callables
    must broadcast over numpy arrays in s and x.
    """

    name: str
    params: tuple
    branches: tuple
    declared_c: tuple | None = None      # growth |g_i'| <= c_i (1 + |x|)
    declared_d: tuple | None = None      # sign condition g_i'(s,x) x >= -d_i |x|

    @property
    def m(self):
        return len(self.branches)


def plus_smooth(eps, x):
    """Smoothed plus function: returns (value, slope), vectorized in x."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=np.float64)
    half = 0.5 * eps
    hi = x > half
    mid = (x >= -half) & ~hi
    val = np.where(hi, x, 0.0)
    val = np.where(mid, (x + half) ** 2 / (2.0 * eps), val)
    slope = np.where(hi, 1.0, 0.0)
    slope = np.where(mid, (x + half) / eps, slope)
    return val, slope


def plus_smooth_curvature(eps, x):
    """Second derivative of P; at the two kinks the middle-branch value 1/eps."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=np.float64)
    half = 0.5 * eps
    return np.where((x >= -half) & (x <= half), 1.0 / eps, 0.0)


def _branch_values(spec, s, x, order):
    s = np.asarray(s, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    out = []
    for g, gx, gxx in spec.branches:
        f = (g, gx, gxx)[order]
        if f is None:
            return None
        out.append(np.broadcast_to(np.asarray(f(s, x), dtype=np.float64),
                                   np.broadcast_shapes(s.shape, x.shape)).copy())
    return out


def unsmoothed_value(spec, s, x):
    """j(s, x) = max_i g_i(s, x)."""
    vals = _branch_values(spec, s, x, 0)
    return np.maximum.reduce(vals)


def superpotential_value(spec, params, s, x):
    """Smoothed density jhat(s, eps, x); independent of eps when m = 1."""
    vals = _branch_values(spec, s, x, 0)
    acc = np.zeros_like(vals[0])
    for i in range(spec.m - 1, 0, -1):
        acc, _ = plus_smooth(params.epsilon, vals[i] - vals[i - 1] + acc)
    return vals[0] + acc


def superpotential_slope(spec, params, s, x):
    """d/dx of jhat, plus the convex weights.

    Returns (slope, lambdas) with lambdas of shape (m,) + broadcast(s, x):
    slope = sum_i lambdas[i] * g_i'(s, x), lambdas in [0, 1], summing to 1.
    """
    vals = _branch_values(spec, s, x, 0)
    grads = _branch_values(spec, s, x, 1)
    m = spec.m
    acc = np.zeros_like(vals[0])
    dacc = np.zeros_like(vals[0])
    sigma = [None] * (m + 1)
    for i in range(m - 1, 0, -1):
        z = vals[i] - vals[i - 1] + acc
        acc, sig = plus_smooth(params.epsilon, z)
        dacc = sig * (grads[i] - grads[i - 1] + dacc)
        sigma[i + 1] = sig  # weight applied at nesting stage for branch i+1
    slope = grads[0] + dacc

    lambdas = np.zeros((m,) + vals[0].shape)
    prod = np.ones_like(vals[0])
    for i in range(m):
        if i < m - 1:
            lambdas[i] = prod * (1.0 - sigma[i + 2])
            prod = prod * sigma[i + 2]
        else:
            lambdas[i] = prod
    return slope, lambdas


def superpotential_curvature(spec, params, s, x):
    """d^2/dx^2 of jhat (middle-branch selection at the P kinks)."""
    curvs = _branch_values(spec, s, x, 2)
    if curvs is None:
        # no branch second derivatives: difference the slope
        x = np.asarray(x, dtype=np.float64)
        delta = 1e-6 * np.maximum(1.0, np.abs(x))
        sp, _ = superpotential_slope(spec, params, s, x + delta)
        sm, _ = superpotential_slope(spec, params, s, x - delta)
        return (sp - sm) / (2.0 * delta)
    vals = _branch_values(spec, s, x, 0)
    grads = _branch_values(spec, s, x, 1)
    acc = np.zeros_like(vals[0])
    dacc = np.zeros_like(vals[0])
    d2acc = np.zeros_like(vals[0])
    for i in range(spec.m - 1, 0, -1):
        z = vals[i] - vals[i - 1] + acc
        dz = grads[i] - grads[i - 1] + dacc
        d2z = curvs[i] - curvs[i - 1] + d2acc
        pc = plus_smooth_curvature(params.epsilon, z)
        acc, sig = plus_smooth(params.epsilon, z)
        dacc = sig * dz
        d2acc = pc * dz * dz + sig * d2z
    return curvs[0] + d2acc


def clarke_dirderiv(spec, s, x, direction):
    """Clarke directional derivative j0(s, x; direction).

    For a max of C1 branches the Clarke gradient is the convex hull of the
    active branch derivatives, so j0 = max over that interval times the
    direction.  Vectorized; active set decided with a 1e-12 relative slack.
    """
    vals = _branch_values(spec, s, x, 0)
    grads = _branch_values(spec, s, x, 1)
    vmax = np.maximum.reduce(vals)
    tol = 1e-12 * np.maximum(1.0, np.abs(vmax))
    gmin = np.full_like(vmax, np.inf)
    gmax = np.full_like(vmax, -np.inf)
    for v, g in zip(vals, grads):
        act = v >= vmax - tol
        gmin = np.where(act, np.minimum(gmin, g), gmin)
        gmax = np.where(act, np.maximum(gmax, g), gmax)
    d = np.asarray(direction, dtype=np.float64)
    return np.where(d >= 0.0, gmax * d, gmin * d)


@dataclass
class SmoothingGapReport:
    max_gap: float
    bound: float
    argmax_x: float
    ok: bool


def smoothing_error_bound_check(spec, params, grid, s=0.0):
    """Check |jhat - j| <= (m-1) kappa eps on a grid; raise listing violations."""
    grid = np.asarray(grid, dtype=np.float64)
    gap = np.abs(
        superpotential_value(spec, params, s, grid)
        - unsmoothed_value(spec, s, grid)
    )
    k = int(np.argmax(gap))
    bound = params.error_bound(spec.m)
    report = SmoothingGapReport(
        max_gap=float(gap[k]), bound=bound, argmax_x=float(grid[k]),
        ok=bool(gap[k] <= bound),
    )
    if not report.ok:
        raise ValueError(
            f"smoothing gap {report.max_gap:.6e} exceeds bound "
            f"{bound:.6e} at x = {report.argmax_x!r}"
        )
    return report


def estimate_onesided_constant(spec, params, interval, n_samples, s=0.0):
    """Sampled one-sided Lipschitz constant of x -> jhat_x(s, eps, x).

    alpha_hat = max over sample pairs of -(slope_1 - slope_2)/(x_1 - x_2),
    floored at zero.  Uniqueness of the regularized problem needs
    alpha_hat < (L2 coercivity constant of the Steklov operator).
    """
    lo, hi = interval
    if not hi > lo:
        raise ValueError("empty sampling interval")
    xs = np.linspace(lo, hi, int(n_samples))
    slope, _ = superpotential_slope(spec, params, s, xs)
    dx = xs[:, None] - xs[None, :]
    ds = slope[:, None] - slope[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        quot = np.where(dx != 0.0, -ds / dx, -np.inf)
    return float(max(0.0, quot.max()))


@dataclass
class GrowthReport:
    measured_c: tuple
    measured_d: tuple
    fd_max_err: float
    ok: bool
    messages: list = field(default_factory=list)


def validate_superpotential(spec, s_samples, x_samples):
    """Measure the growth constants and difference-check branch derivatives."""
    s = np.asarray(s_samples, dtype=np.float64).ravel()
    x = np.asarray(x_samples, dtype=np.float64).ravel()
    S, X = np.meshgrid(s, x, indexing="ij")
    msgs = []
    cs, ds = [], []
    fd_err = 0.0
    for k, (g, gx, _) in enumerate(spec.branches):
        gv = np.asarray(gx(S, X), dtype=np.float64)
        gv = np.broadcast_to(gv, S.shape)
        cs.append(float(np.max(np.abs(gv) / (1.0 + np.abs(X)))))
        nz = X != 0.0
        neg = np.where(nz, -gv * X / np.maximum(np.abs(X), 1e-300), -np.inf)
        ds.append(float(max(0.0, neg.max())))
        delta = 1e-6 * np.maximum(1.0, np.abs(X))
        fd = (g(S, X + delta) - g(S, X - delta)) / (2.0 * delta)
        err = float(np.max(np.abs(fd - gv) / np.maximum(1.0, np.abs(gv))))
        fd_err = max(fd_err, err)
        if err > 1e-6:
            msgs.append(f"branch {k}: derivative mismatch {err:.2e}")
    ok = not msgs
    if spec.declared_c is not None:
        for k, (meas, dec) in enumerate(zip(cs, spec.declared_c)):
            if meas > dec * (1.0 + 1e-9):
                ok = False
                msgs.append(
                    f"branch {k}: measured growth {meas:.4g} exceeds "
                    f"declared c = {dec:.4g}"
                )
    if spec.declared_d is not None:
        for k, (meas, dec) in enumerate(zip(ds, spec.declared_d)):
            if meas > dec * (1.0 + 1e-9):
                ok = False
                msgs.append(
                    f"branch {k}: measured sign constant {meas:.4g} exceeds "
                    f"declared d = {dec:.4g}"
                )
    return GrowthReport(tuple(cs), tuple(ds), fd_err, ok, msgs)


# --- catalog -------------------------------------------------------------

def _const(c):
    return lambda s, x: c + 0.0 * np.asarray(x, dtype=np.float64)


def tresca(g):
    """Tresca friction bound g > 0: j = max(g x, -g x) = g |x|."""
    g = float(g)
    if g <= 0.0:
        raise ValueError("tresca bound must be positive")
    return SuperpotentialSpec(
        name="tresca",
        params=(g,),
        branches=(
            (lambda s, x: g * x, _const(g), _const(0.0)),
            (lambda s, x: -g * x, _const(-g), _const(0.0)),
        ),
        declared_c=(g, g),
        declared_d=(g, g),
    )


def linear(q):
    """Single smooth branch j = q x; q a number or a callable of arc length."""
    if callable(q):
        qf = q
        params = ("callable",)
    else:
        qv = float(q)
        qf = lambda s: qv + 0.0 * np.asarray(s, dtype=np.float64)  # noqa: E731
        params = (qv,)
    return SuperpotentialSpec(
        name="linear",
        params=params,
        branches=(
            (
                lambda s, x: qf(s) * x,
                lambda s, x: qf(s) + 0.0 * np.asarray(x, dtype=np.float64),
                _const(0.0),
            ),
        ),
    )


def nonconvex(g, beta):
    """Nonmonotone two-branch density j = max(g x, -g x) - (beta/2) x^2."""
    g = float(g)
    beta = float(beta)
    if g <= 0.0 or beta < 0.0:
        raise ValueError("need g > 0 and beta >= 0")
    return SuperpotentialSpec(
        name="nonconvex",
        params=(g, beta),
        branches=(
            (
                lambda s, x: g * x - 0.5 * beta * x * x,
                lambda s, x: g - beta * np.asarray(x, dtype=np.float64),
                _const(-beta),
            ),
            (
                lambda s, x: -g * x - 0.5 * beta * x * x,
                lambda s, x: -g - beta * np.asarray(x, dtype=np.float64),
                _const(-beta),
            ),
        ),
    )


_CATALOG = {"tresca": (tresca, 1), "linear": (linear, 1), "nonconvex": (nonconvex, 2)}


def superpotential_by_name(name, params):
    """Build a catalog superpotential: tresca(g), linear(q), nonconvex(g, beta)."""
    try:
        builder, nargs = _CATALOG[name]
    except KeyError:
        raise ValueError(
            f"unknown superpotential {name!r} (have {sorted(_CATALOG)})"
        ) from None
    if len(params) != nargs:
        raise ValueError(f"{name} takes {nargs} parameter(s), got {len(params)}")
    return builder(*params)
