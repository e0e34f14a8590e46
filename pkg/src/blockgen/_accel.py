"""Numba switch.

Hot kernels are compiled with ``numba.njit`` unless ``BLOCKGEN_DISABLE_NUMBA``
is set to a truthy value (or numba is not importable), in which case the
pure-numpy implementations in :mod:`blockgen.kernels` are used instead.
"""

import os

_FLAG = os.environ.get("BLOCKGEN_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and _FLAG not in ("1", "true", "yes", "on")


def njit(fn):
    """Compile ``fn`` in nopython mode when numba is usable, else return it as-is."""
    if not NUMBA_AVAILABLE:
        return fn
    return numba.njit(cache=True)(fn)
