"""Backend selection for the numeric kernels.

Set HVIBEM_PURE_NUMPY=1 to force the vectorized numpy kernels even when
numba is installed.  Without the flag we try numba first and fall back
silently if it is missing.
"""

import os

_FLAG = os.environ.get("HVIBEM_PURE_NUMPY", "").strip().lower()
PURE_NUMPY_REQUESTED = _FLAG in ("1", "true", "yes", "on")

HAS_NUMBA = False
if not PURE_NUMPY_REQUESTED:
    try:
        import numba  # noqa: F401

        HAS_NUMBA = True
    except ImportError:
        HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not PURE_NUMPY_REQUESTED

# keep compilation deterministic: no fastmath, no parallel reductions
NUMBA_OPTS = {"cache": True, "fastmath": False, "nogil": True}
