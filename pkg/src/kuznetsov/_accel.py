"""Numba switch.

Set ``KUZNETSOV_NUMBA=0`` in the environment to force the pure-numpy kernels.
The flag is read once at import time.
"""
import os

_flag = os.environ.get("KUZNETSOV_NUMBA", "1").strip().lower()
_requested = _flag not in ("0", "false", "no", "off")

try:
    if not _requested:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func

        return decorator


USE_NUMBA = HAVE_NUMBA
BACKEND = "numba" if USE_NUMBA else "numpy"
