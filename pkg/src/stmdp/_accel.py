"""Optional numba acceleration.

Set ``STMDP_DISABLE_NUMBA=1`` to force the pure-numpy code paths.
"""
import os

_disabled = os.environ.get("STMDP_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _disabled:
        raise ImportError("numba disabled by STMDP_DISABLE_NUMBA")
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap
