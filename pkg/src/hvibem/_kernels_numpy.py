"""Vectorized numpy implementations of the hot kernels.

Shared contract with _kernels_numba: every function takes/returns plain
float64/int64 arrays and performs no Python-level callbacks, so the two
modules are drop-in replacements for each other.
"""

import numpy as np

BACKEND = "numpy"

_TWO_PI = 2.0 * np.pi


def _panel_frames(ax, ay, bx, by, lens):
    ux = (bx - ax) / lens
    uy = (by - ay) / lens
    # outward normal for a CCW boundary loop
    return ux, uy, uy, -ux


def sl_inner(px, py, ax, ay, bx, by, lens):
    """Exact single-layer inner integrals.

    out[i, j] = integral over panel j of -(1/2pi) ln|x_i - y| ds_y.
    Valid for observation points away from panel endpoints; points exactly
    on a panel's line are fine (q = 0 branch).
    """
    ux, uy, nx, ny = _panel_frames(ax, ay, bx, by, lens)
    dx = px[:, None] - ax[None, :]
    dy = py[:, None] - ay[None, :]
    p = dx * ux[None, :] + dy * uy[None, :]
    q = dx * nx[None, :] + dy * ny[None, :]
    t1 = lens[None, :] - p
    t0 = -p
    return -(_sl_antideriv(t1, q) - _sl_antideriv(t0, q)) / _TWO_PI


def _sl_antideriv(t, q):
    # antiderivative of ln sqrt(t^2+q^2) in t; the q*atan term drops out when q=0
    r2 = t * t + q * q
    lg = np.where(r2 > 0.0, np.log(np.where(r2 > 0.0, r2, 1.0)), 0.0)
    qs = np.where(q == 0.0, 1.0, q)
    return 0.5 * t * lg - t + q * np.arctan(t / qs)


def dl_inner_p1(px, py, ax, ay, bx, by, lens):
    """Exact double-layer inner integrals against the two P1 panel shapes.

    Returns (tail, head), each (n_obs, n_panels):
      tail[i, j] = integral over panel j of dG/dn_y(x_i, y) (1 - t/L) ds_y
      head[i, j] = same with weight t/L
    with G = -(1/2pi) ln|x-y| and n the outward panel normal.  Collinear
    observation points give exact zeros.
    """
    ux, uy, nx, ny = _panel_frames(ax, ay, bx, by, lens)
    dx = px[:, None] - ax[None, :]
    dy = py[:, None] - ay[None, :]
    p = dx * ux[None, :] + dy * uy[None, :]
    q = dx * nx[None, :] + dy * ny[None, :]
    L = lens[None, :]
    t1 = L - p
    t0 = -p
    qs = np.where(q == 0.0, 1.0, q)
    ang = np.arctan(t1 / qs) - np.arctan(t0 / qs)
    r2a = t0 * t0 + q * q
    r2b = t1 * t1 + q * q
    safe = (r2a > 0.0) & (r2b > 0.0)
    lg = 0.5 * (
        np.log(np.where(safe, r2b, 1.0)) - np.log(np.where(safe, r2a, 1.0))
    )
    j0 = ang / _TWO_PI
    j1 = (p * ang + q * lg) / _TWO_PI
    on_line = q == 0.0
    j0 = np.where(on_line, 0.0, j0)
    j1 = np.where(on_line, 0.0, j1)
    head = j1 / L
    return j0 - head, head


def scatter_vec(idx, vals, n):
    """Accumulate per-element vectors (m, k) into a global vector."""
    out = np.zeros(n)
    np.add.at(out, idx.ravel(), vals.ravel())
    return out

def scatter_mat(idx, vals, n):
    """Accumulate per-element matrices (m, k, k) into a dense global matrix."""
    out = np.zeros((n, n))
    m, k = idx.shape
    rows = np.repeat(idx, k, axis=1)
    cols = np.tile(idx, (1, k))
    np.add.at(out, (rows.ravel(), cols.ravel()), vals.reshape(m, k * k).ravel())
    return out
