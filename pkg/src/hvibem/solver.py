"""Coupled FEM/BEM system for the regularized interface problem.

Unknowns: interior nodal values u (all mesh vertices), boundary jump
values v on the arc-interior nodes of the friction part (values at arc
endpoints are pinned to zero so the extension by zero stays conforming),
and one Lagrange multiplier for the flux-gauge constraint
<S_h 1, tr u + v - u0> = 0.  The discrete energy is

    P(u, v) = G(u) + 1/2 <S_h(tr u + v), tr u + v> + J_eps(v) - lambda(u, v)

with lambda(u, v) = (f0, u) + <t0 + S_h u0, tr u + v> and J_eps the
dual-cell quadrature of the smoothed friction density.  The assembled
residual is the exact gradient of P (plus the multiplier term), which the
tests exploit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import bem, fem
from .mesh import dual_partition
from .smoothing import (
    estimate_onesided_constant,
    superpotential_curvature,
    superpotential_slope,
    superpotential_value,
)

__all__ = [
    "SolverConfig",
    "ProblemData",
    "DiscreteSystem",
    "FrictionTerm",
    "Solution",
    "NewtonFailure",
    "assemble_system",
    "friction_residual",
    "friction_tangent",
    "solve_newton",
    "energy",
    "residual",
    "e_norm",
]


@dataclass(frozen=True)
class ProblemData:
    """Right-hand side data: volume source, exterior flux, jump datum.

    f0(x, y) and t0(x, y, nx, ny) are vectorized callables; u0 is either a
    callable of (x, y) or a nodal array in boundary loop order.
    """

    f0: object
    t0: object
    u0: object


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10                  # relative residual tolerance
    max_iter: int = 50
    damping: bool = True
    armijo_slope: float = 1e-4
    armijo_factor: float = 0.5
    min_step: float = 1e-10
    onesided_interval: tuple = (-5.0, 5.0)
    onesided_samples: int = 801


@dataclass(frozen=True)
class FrictionTerm:
    """Dual-cell quadrature data of the friction boundary part."""

    s: np.ndarray            # arc-length coordinates of the cell nodes
    lengths: np.ndarray      # cell measures |K_i|


class NewtonFailure(RuntimeError):
    """Newton did not converge; carries the residual norm history."""

    def __init__(self, msg, history):
        super().__init__(f"{msg} (residual history: {[f'{r:.3e}' for r in history]})")
        self.history = history


@dataclass
class DiscreteSystem:
    mesh: object
    material: object
    spec: object
    params: object
    steklov: object
    dual: object
    friction: FrictionTerm
    bids: np.ndarray          # boundary node ids, loop order (trace map)
    vb: np.ndarray            # boundary dof of each free friction node
    dual_free: np.ndarray     # indices of free cells within the dual partition
    u0_b: np.ndarray
    load_f0: np.ndarray
    lam_bnd: np.ndarray       # t_vec + S u0
    c_bnd: np.ndarray         # S 1
    b_c: float
    stiffness: np.ndarray = field(repr=False, default=None)
    mass: np.ndarray = field(repr=False, default=None)

    @property
    def n_u(self):
        return self.mesh.n_vertices

    @property
    def n_v(self):
        return self.vb.shape[0]

    @property
    def n_dof(self):
        return self.n_u + self.n_v + 1

    def embed_v(self, v):
        """Free friction values -> full boundary P1 vector (zero elsewhere)."""
        out = np.zeros(self.bids.shape[0])
        out[self.vb] = v
        return out

    def v_all_cells(self, v):
        """Free friction values -> values at every dual cell node."""
        out = np.zeros(self.dual.n_cells)
        out[self.dual_free] = v
        return out


@dataclass
class Solution:
    u: np.ndarray
    v: np.ndarray
    multiplier: float
    iterations: int
    residual_history: list
    energy_history: list
    energy: float
    converged: bool
    uniqueness_ok: bool
    alpha_hat: float
    coercivity: float


def assemble_system(mesh, material, spec, params, data, gauss_order=16):
    """Build the coupled discrete system.

    `data` provides f0(x, y), t0(x, y, nx, ny) and the jump datum u0
    (callable of (x, y) or nodal array in boundary loop order).
    """
    fem.validate_material(material)
    ops = bem.boundary_operator_set(mesh, gauss_order)
    steklov = bem.build_steklov(ops)
    geom = ops.geometry
    dual = dual_partition(mesh)

    bids = geom.node_ids
    bindex = {int(n): k for k, n in enumerate(bids)}
    free_ids = dual.node_ids[dual.free]
    if free_ids.size == 0:
        raise ValueError(
            "friction part has no arc-interior nodes; refine the mesh"
        )
    vb = np.array([bindex[int(n)] for n in free_ids], dtype=np.int64)
    dual_free = np.where(dual.free)[0]

    u0 = data.u0
    if callable(u0):
        u0_b = np.asarray(
            u0(geom.points[:, 0], geom.points[:, 1]), dtype=np.float64
        )
    else:
        u0_b = np.asarray(u0, dtype=np.float64)
        if u0_b.shape != (bids.shape[0],):
            raise ValueError(
                f"u0 nodal data must have length {bids.shape[0]}"
            )

    load_f0 = fem.assemble_load(mesh, data.f0)
    t_vec = bem.boundary_p1_load(geom, data.t0)
    c_bnd = steklov.S @ np.ones(bids.shape[0])
    if np.linalg.norm(c_bnd) < 1e-14:
        raise ValueError("degenerate Steklov operator: S_h 1 vanishes")

    return DiscreteSystem(
        mesh=mesh,
        material=material,
        spec=spec,
        params=params,
        steklov=steklov,
        dual=dual,
        friction=FrictionTerm(s=dual.s.copy(), lengths=dual.lengths.copy()),
        bids=bids,
        vb=vb,
        dual_free=dual_free,
        u0_b=u0_b,
        load_f0=load_f0,
        lam_bnd=t_vec + steklov.S @ u0_b,
        c_bnd=c_bnd,
        b_c=float(c_bnd @ u0_b),
        stiffness=fem.p1_stiffness(mesh),
        mass=fem.p1_mass(mesh),
    )


def friction_residual(term, spec, params, v_nodal):
    """Dual-cell friction residual, entry i = jhat_x(s_i, eps, v_i) |K_i|."""
    v = np.asarray(v_nodal, dtype=np.float64)
    slope, _ = superpotential_slope(spec, params, term.s, v)
    return slope * term.lengths


def friction_tangent(term, spec, params, v_nodal):
    """Diagonal of the friction tangent, jhat_xx(s_i, eps, v_i) |K_i|."""
    v = np.asarray(v_nodal, dtype=np.float64)
    return superpotential_curvature(spec, params, term.s, v) * term.lengths


def _split(system, x):
    n_u, n_v = system.n_u, system.n_v
    return x[:n_u], x[n_u : n_u + n_v], x[n_u + n_v]


def residual(system, x):
    """Full KKT residual at the stacked state (u, v, multiplier)."""
    u, v, mu = _split(system, x)
    gb = u[system.bids] + system.embed_v(v)
    Sg = system.steklov.S @ gb
    grad_b = Sg + mu * system.c_bnd - system.lam_bnd

    F_u = fem.assemble_dg_residual(system.mesh, system.material, u) - system.load_f0
    np.add.at(F_u, system.bids, grad_b)

    fric = friction_residual(
        system.friction, system.spec, system.params, system.v_all_cells(v)
    )
    F_v = grad_b[system.vb] + fric[system.dual_free]

    F_c = system.c_bnd @ gb - system.b_c
    return np.concatenate([F_u, F_v, [F_c]])


def _jacobian(system, x):
    u, v, mu = _split(system, x)
    n_u, n_v = system.n_u, system.n_v
    n = system.n_dof
    J = np.zeros((n, n))

    J[:n_u, :n_u] = fem.assemble_dg_tangent(system.mesh, system.material, u)
    S = system.steklov.S
    iu = system.bids
    J[np.ix_(iu, iu)] += S
    J[np.ix_(iu, n_u + np.arange(n_v))] += S[:, system.vb]
    J[np.ix_(n_u + np.arange(n_v), iu)] += S[system.vb, :]
    J[n_u : n_u + n_v, n_u : n_u + n_v] = S[np.ix_(system.vb, system.vb)]

    fric_diag = friction_tangent(
        system.friction, system.spec, system.params, system.v_all_cells(v)
    )
    J[n_u + np.arange(n_v), n_u + np.arange(n_v)] += fric_diag[system.dual_free]

    cu = np.zeros(n_u)
    np.add.at(cu, iu, system.c_bnd)
    J[:n_u, -1] = cu
    J[-1, :n_u] = cu
    J[n_u : n_u + n_v, -1] = system.c_bnd[system.vb]
    J[-1, n_u : n_u + n_v] = system.c_bnd[system.vb]
    return J


def energy(system, x):
    """Regularized energy P(u, v); ignores the multiplier component."""
    u, v, _ = _split(system, x)
    gb = u[system.bids] + system.embed_v(v)
    G = fem.interior_energy(system.mesh, system.material, u)
    quad = 0.5 * gb @ (system.steklov.S @ gb)
    v_cells = system.v_all_cells(v)
    jhat = superpotential_value(
        system.spec, system.params, system.friction.s, v_cells
    )
    J_eps = float(jhat @ system.friction.lengths)
    lam = system.load_f0 @ u + system.lam_bnd @ gb
    return float(G + quad + J_eps - lam)


def e_norm(system, du, dv):
    """Discrete energy-norm surrogate: H1 on the domain, L2 + Steklov on v."""
    du = np.asarray(du, dtype=np.float64)
    dv = np.asarray(dv, dtype=np.float64)
    a = du @ (system.stiffness @ du) + du @ (system.mass @ du)
    M1s = bem.boundary_p1_mass(system.steklov.geometry, labels=("S",))
    ev = system.embed_v(dv)
    b = ev @ (M1s @ ev) + ev @ (system.steklov.S @ ev)
    return float(np.sqrt(a + b))


def solve_newton(system, config=None, initial=None):
    """Damped Newton on the KKT residual (Armijo on the squared norm)."""
    cfg = config or SolverConfig()
    x = (
        np.zeros(system.n_dof)
        if initial is None
        else np.asarray(initial, dtype=np.float64).copy()
    )
    if x.shape != (system.n_dof,):
        raise ValueError(f"initial state must have {system.n_dof} entries")

    rhs = np.concatenate(
        [
            system.load_f0 + _scatter_b(system, system.lam_bnd),
            system.lam_bnd[system.vb],
            [system.b_c],
        ]
    )
    scale = max(1.0, float(np.linalg.norm(rhs)))

    F = residual(system, x)
    rnorm = float(np.linalg.norm(F))
    history = [rnorm]
    energies = [energy(system, x)]
    it = 0
    while rnorm > cfg.tol * scale:
        if it >= cfg.max_iter:
            raise NewtonFailure("no convergence in max_iter", history)
        J = _jacobian(system, x)
        delta = sla.solve(J, -F, assume_a="sym")
        t = 1.0
        phi0 = rnorm * rnorm
        if cfg.damping:
            while True:
                F_new = residual(system, x + t * delta)
                phi = float(F_new @ F_new)
                if phi <= (1.0 - 2.0 * cfg.armijo_slope * t) * phi0:
                    break
                t *= cfg.armijo_factor
                if t < cfg.min_step:
                    raise NewtonFailure("line search stalled", history)
        else:
            F_new = residual(system, x + t * delta)
        x = x + t * delta
        F = F_new
        rnorm = float(np.linalg.norm(F))
        history.append(rnorm)
        energies.append(energy(system, x))
        it += 1

    u, v, mu = _split(system, x)
    alpha = _alpha_hat(system, cfg)
    coer = bem.l2_coercivity_constant(system.steklov)
    return Solution(
        u=u.copy(),
        v=v.copy(),
        multiplier=float(mu),
        iterations=it,
        residual_history=history,
        energy_history=energies,
        energy=energies[-1],
        converged=True,
        uniqueness_ok=bool(alpha < coer),
        alpha_hat=alpha,
        coercivity=coer,
    )


def _scatter_b(system, vec_b):
    out = np.zeros(system.n_u)
    np.add.at(out, system.bids, vec_b)
    return out


def _alpha_hat(system, cfg):
    """One-sided constant of the smoothed density, maximized over cell arcs."""
    svals = system.friction.s
    picks = svals if svals.size <= 8 else svals[:: max(1, svals.size // 8)]
    return max(
        estimate_onesided_constant(
            system.spec,
            system.params,
            cfg.onesided_interval,
            cfg.onesided_samples,
            s=float(sv),
        )
        for sv in picks
    )
