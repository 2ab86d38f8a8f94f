"""Switch between numba-compiled kernels and their pure-numpy twins.

Set ``CBMCAUSE_NUMBA=0`` in the environment before importing the package to
force the numpy path. When numba is not importable the numpy path is used
regardless of the flag.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("CBMCAUSE_NUMBA", "1").strip().lower()

try:  # pragma: no cover - depends on the environment
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("0", "false", "no", "off")


def njit(fn):
    """Compile ``fn`` in nopython mode when numba is available, else return it."""
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
