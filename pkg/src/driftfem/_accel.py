"""Optional numba acceleration.

Set ``DRIFTFEM_DISABLE_NUMBA=1`` to force the pure-numpy kernels. The flag is
read once at import time.
"""
import functools
import os

_DISABLED = os.environ.get("DRIFTFEM_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _DISABLED:
        raise ImportError("disabled by DRIFTFEM_DISABLE_NUMBA")
    import numba as _nb

    HAS_NUMBA = True
    njit = functools.partial(_nb.njit, cache=True, nogil=True)
except ImportError:
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
