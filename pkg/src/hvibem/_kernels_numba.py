"""numba njit implementations of the hot kernels.

Same array contract as _kernels_numpy; explicit loops, single-threaded
(deterministic summation order).
"""

import numpy as np
from numba import njit

from ._backend import NUMBA_OPTS

BACKEND = "numba"

_TWO_PI = 2.0 * np.pi


@njit(**NUMBA_OPTS)
def _sl_antideriv(t, q):
    r2 = t * t + q * q
    if r2 <= 0.0:
        return 0.0
    val = 0.5 * t * np.log(r2) - t
    if q != 0.0:
        val += q * np.arctan(t / q)
    return val


@njit(**NUMBA_OPTS)
def sl_inner(px, py, ax, ay, bx, by, lens):
    n_obs = px.shape[0]
    n_pan = ax.shape[0]
    out = np.empty((n_obs, n_pan))
    for j in range(n_pan):
        L = lens[j]
        ux = (bx[j] - ax[j]) / L
        uy = (by[j] - ay[j]) / L
        nx = uy
        ny = -ux
        for i in range(n_obs):
            dx = px[i] - ax[j]
            dy = py[i] - ay[j]
            p = dx * ux + dy * uy
            q = dx * nx + dy * ny
            out[i, j] = -(
                _sl_antideriv(L - p, q) - _sl_antideriv(-p, q)
            ) / _TWO_PI
    return out


@njit(**NUMBA_OPTS)
def dl_inner_p1(px, py, ax, ay, bx, by, lens):
    n_obs = px.shape[0]
    n_pan = ax.shape[0]
    tail = np.zeros((n_obs, n_pan))
    head = np.zeros((n_obs, n_pan))
    for j in range(n_pan):
        L = lens[j]
        ux = (bx[j] - ax[j]) / L
        uy = (by[j] - ay[j]) / L
        nx = uy
        ny = -ux
        for i in range(n_obs):
            dx = px[i] - ax[j]
            dy = py[i] - ay[j]
            q = dx * nx + dy * ny
            if q == 0.0:
                continue
            p = dx * ux + dy * uy
            t1 = L - p
            t0 = -p
            ang = np.arctan(t1 / q) - np.arctan(t0 / q)
            r2a = t0 * t0 + q * q
            r2b = t1 * t1 + q * q
            lg = 0.5 * (np.log(r2b) - np.log(r2a))
            j1 = (p * ang + q * lg) / (_TWO_PI * L)
            tail[i, j] = ang / _TWO_PI - j1
            head[i, j] = j1
    return tail, head


@njit(**NUMBA_OPTS)
def scatter_vec(idx, vals, n):
    out = np.zeros(n)
    flat_i = idx.ravel()
    flat_v = vals.ravel()
    for k in range(flat_i.shape[0]):
        out[flat_i[k]] += flat_v[k]
    return out


@njit(**NUMBA_OPTS)
def scatter_mat(idx, vals, n):
    out = np.zeros((n, n))
    m, k = idx.shape
    for e in range(m):
        for a in range(k):
            ia = idx[e, a]
            for b in range(k):
                out[ia, idx[e, b]] += vals[e, a, b]
    return out
