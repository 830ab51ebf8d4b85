"""Selects the compiled kernels when available, else the NumPy fallback.

Set ``MTMVDR_PURE_PYTHON=1`` to force the fallback.
"""
import os
import warnings

import numpy as np

from . import _kernels_py as python_backend

compiled_backend = None
if not os.environ.get("MTMVDR_PURE_PYTHON"):
    try:
        from . import _kernels as compiled_backend
    except ImportError:
        warnings.warn(
            "Could not import compiled mtmvdr._kernels, falling back to the NumPy "
            "implementation. Rebuild with `pip install -e . --no-build-isolation`.",
            stacklevel=2,
        )

BACKEND = "cython" if compiled_backend is not None else "python"
_impl = compiled_backend if compiled_backend is not None else python_backend


def outer_sum(z):
    return _impl.outer_sum(np.ascontiguousarray(z, dtype=np.complex128))


def add_pulses(out, delays, gains, half_width=40):
    _impl.add_pulses(out, np.ascontiguousarray(delays, dtype=np.float64),
                     np.ascontiguousarray(gains, dtype=np.float64), int(half_width))
