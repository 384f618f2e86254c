"""numba switch: set FPVERIFY_DISABLE_JIT=1 to run the kernels as plain Python."""

import os

JIT_ENABLED = os.environ.get("FPVERIFY_DISABLE_JIT", "") not in ("1", "true", "yes")

if JIT_ENABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        JIT_ENABLED = False

if not JIT_ENABLED:
    def njit(func=None, **kwargs):
        if func is not None:
            return func

        def wrapper(f):
            return f
        return wrapper
