"""Backend selection for the hot loops.

Numba is used when importable unless ``COULOMBGAS_DISABLE_NUMBA`` is set to a
truthy value, in which case the pure-numpy fallbacks in ``_kernels`` are used.
"""

import os

_FLAG = os.environ.get("COULOMBGAS_DISABLE_NUMBA", "").strip().lower()
DISABLED = _FLAG in {"1", "true", "yes", "on"}

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not DISABLED
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(func):
    """Compile ``func`` with numba if available, otherwise return it unchanged."""
    if HAS_NUMBA:
        return numba.njit(cache=True, fastmath=False)(func)
    return func
