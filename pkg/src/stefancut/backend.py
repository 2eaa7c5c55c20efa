"""Kernel backend selection.

The hot inner loops (Hamilton-Jacobi sweeps, cut-cell geometry, batched
interpolation) exist twice: as numba @njit loops and as pure-numpy
vectorized code. The env var STEFAN_CUT_BACKEND picks one:

    STEFAN_CUT_BACKEND=numba   force numba (error if unavailable)
    STEFAN_CUT_BACKEND=numpy   force the pure-numpy fallback
    unset                      numba when importable, else numpy

Both backends produce the same values (see tests/test_backends.py);
benchmarks/kernel_bench.py compares their speed.
"""

import os
import warnings

_requested = os.environ.get("STEFAN_CUT_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ValueError(
        f"STEFAN_CUT_BACKEND={_requested!r}: expected 'numba' or 'numpy'"
    )

NUMBA_AVAILABLE = False
if _requested != "numpy":
    try:
        import numba  # noqa: F401

        NUMBA_AVAILABLE = True
    except ImportError:
        if _requested == "numba":
            raise
        warnings.warn("numba not importable, falling back to numpy kernels")

BACKEND = "numba" if (NUMBA_AVAILABLE and _requested != "numpy") else "numpy"


def active_backend() -> str:
    """Name of the kernel backend in use ('numba' or 'numpy')."""
    return BACKEND
