"""Backend selection for the hot numeric kernels.

Kernels are compiled with numba when it is importable.  Setting the
environment variable ``QPGEN_DISABLE_NUMBA=1`` before import forces the
vectorized numpy implementations instead.
"""
import os

_FLAG = "QPGEN_DISABLE_NUMBA"


def numba_requested():
    return os.environ.get(_FLAG, "").strip().lower() not in ("1", "true", "yes", "on")


try:
    import numba  # noqa: F401
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and numba_requested()
