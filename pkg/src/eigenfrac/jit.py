"""Runtime selection of the compiled kernel path.

The hot geometry kernels are written twice: a scalar loop compiled with
numba, and a vectorized pure-numpy fallback.  The environment variable
``EIGENFRAC_JIT`` picks the path at import time ("0"/"false"/"off"
selects the fallback).  If numba is not importable the fallback is used
silently, so the package stays functional on a bare numpy install.
"""

import os

_flag = os.environ.get("EIGENFRAC_JIT", "1").strip().lower()
JIT_ENABLED = _flag not in ("0", "false", "off", "no")

if JIT_ENABLED:
    try:
        from numba import njit, prange
    except ImportError:  # pragma: no cover - depends on install
        JIT_ENABLED = False

if not JIT_ENABLED:
    def njit(func=None, **kwargs):
        """No-op stand-in for numba.njit."""
        if func is not None:
            return func

        def wrapper(f):
            return f

        return wrapper

    def prange(*args):
        return range(*args)


def set_thread_count(n: int) -> int:
    """Request ``n`` worker threads for parallel kernels.

    The request is clamped to what the numba runtime allows; on the
    fallback path everything is sequential.  Returns the effective count.
    """
    if not JIT_ENABLED:
        return 1
    from numba import config, set_num_threads

    eff = max(1, min(int(n), int(config.NUMBA_NUM_THREADS)))
    set_num_threads(eff)
    return eff
