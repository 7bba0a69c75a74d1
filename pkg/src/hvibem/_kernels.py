"""Dispatch between the numba and pure-numpy kernel implementations."""

from ._backend import USE_NUMBA

if USE_NUMBA:
    from . import _kernels_numba as _impl
else:
    from . import _kernels_numpy as _impl

BACKEND = _impl.BACKEND
sl_inner = _impl.sl_inner
dl_inner_p1 = _impl.dl_inner_p1
scatter_vec = _impl.scatter_vec
scatter_mat = _impl.scatter_mat


def backend_name():
    """Name of the active kernel backend ("numba" or "numpy")."""
    return BACKEND
