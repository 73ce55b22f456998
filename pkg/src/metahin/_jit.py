"""numba import shim: fall back to plain Python when numba is unavailable.

The kernels are written as straight loops, so without numba they still run
(slowly) with identical semantics; set NUMBA_DISABLE_JIT=1 for the same
effect while debugging.
"""

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorate(func):
            return func

        return decorate
