"""Selects between numba-compiled and pure-numpy kernels.

Set ``RKHESSIAN_NUMBA=0`` in the environment before import to force the
numpy path (also used automatically when numba is not importable).
"""

from __future__ import annotations

import os

_flag = os.environ.get("RKHESSIAN_NUMBA", "1").strip().lower()
_requested = _flag not in ("0", "false", "no", "off")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = _requested and HAVE_NUMBA


def njit(fn):
    """``numba.njit(cache=True)`` when numba is present, else identity."""
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True)(fn)
