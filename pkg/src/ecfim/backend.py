"""Score-kernel backend selection.

The compiled Cython kernel is preferred when its extension module built; the
pure-numpy implementation is the fallback. Set ``ECFIM_FORCE_NUMPY=1`` to
force the fallback (used by the agreement tests and the benchmark).
"""

import os

import numpy as np

from . import _score_numpy

if os.environ.get("ECFIM_FORCE_NUMPY", "") == "1":
    _impl = _score_numpy
    BACKEND = "numpy"
else:
    try:
        from . import _score_kernel as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _score_numpy
        BACKEND = "numpy"


def batch_eta_deta(residuals, w, b, wd):
    """Dispatch to the active backend; see _score_numpy.batch_eta_deta."""
    residuals = np.ascontiguousarray(residuals, dtype=np.complex128)
    w = np.ascontiguousarray(w, dtype=np.complex128)
    b = np.ascontiguousarray(b, dtype=np.complex128)
    wd = np.ascontiguousarray(wd, dtype=np.complex128)
    return _impl.batch_eta_deta(residuals, w, b, wd)
