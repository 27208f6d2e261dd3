"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The active backend is chosen at import time (see :mod:`qpgen._accel`).
``get_backend("numpy")`` / ``get_backend("numba")`` return a specific one,
which the tests and the benchmark use to compare the two.
"""
import importlib

from .._accel import HAVE_NUMBA, USE_NUMBA

_NAMES = ("xoshiro_uniform", "trig_jets", "sturm_count", "bisect_eigenvalues", "cond4_hits")


def get_backend(name):
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    return importlib.import_module(f"{__name__}._{name}")


BACKEND = "numba" if USE_NUMBA else "numpy"
_active = get_backend(BACKEND)

xoshiro_uniform = _active.xoshiro_uniform
trig_jets = _active.trig_jets
sturm_count = _active.sturm_count
bisect_eigenvalues = _active.bisect_eigenvalues
cond4_hits = _active.cond4_hits

__all__ = ["BACKEND", "get_backend", *_NAMES]
