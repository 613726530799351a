"""Kernel backend selection.

The hot kernels (trade-cost prox, projections, solver iteration loops)
ship in two variants: numba @njit loops and vectorized numpy. The numba
path is the default whenever numba imports. Set FOLIOSOLVE_BACKEND=numpy
to force the pure-numpy fallback, or FOLIOSOLVE_BACKEND=numba to insist
on the compiled path (raising if numba is unavailable).

Both variants implement the same arithmetic step for step; results agree
to within summation-order roundoff. Tests compare them directly.
"""

import os

try:
    import numba  # noqa: F401

    NUMBA_AVAILABLE = True
except ImportError:
    NUMBA_AVAILABLE = False

_requested = os.environ.get("FOLIOSOLVE_BACKEND", "").strip().lower()

if _requested == "numpy":
    BACKEND = "numpy"
elif _requested == "numba":
    if not NUMBA_AVAILABLE:
        raise ImportError(
            "FOLIOSOLVE_BACKEND=numba but numba is not importable; "
            "install numba or set FOLIOSOLVE_BACKEND=numpy"
        )
    BACKEND = "numba"
elif _requested == "":
    BACKEND = "numba" if NUMBA_AVAILABLE else "numpy"
else:
    raise ValueError(
        f"unknown FOLIOSOLVE_BACKEND={_requested!r}; use 'numba' or 'numpy'"
    )
