"""Optional numba acceleration.

Hot kernels are written twice: a loop version compiled with ``njit`` and a
vectorised numpy version. Set ``LSITCYTO_DISABLE_NUMBA=1`` to force the
numpy path (also used automatically when numba is not importable).
"""

import os

_DISABLED = os.environ.get("LSITCYTO_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by environment")
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:
    _njit = None
    HAVE_NUMBA = False


def njit(fn):
    """Compile ``fn`` with numba when available, else return it unchanged."""
    if HAVE_NUMBA:
        return _njit(cache=True, nogil=True)(fn)
    return fn


def pick(numba_impl, numpy_impl):
    return numba_impl if HAVE_NUMBA else numpy_impl


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
