"""Hot numeric kernels with a selectable backend.

``GSMAS_BACKEND=numpy`` forces the vectorised numpy path; the default uses
the numba-compiled kernels and falls back to numpy if numba is missing.
Both backends are always importable as ``kernels.numpy_backend`` /
``kernels.numba_backend()`` for cross-checks and benchmarks.
"""

import os

from . import _numpy as numpy_backend

KERNELS = ("ml_detect_batch", "evm_batch", "tree_predict_batch", "best_split")


def numba_backend():
    from . import _numba

    return _numba


def _select():
    wanted = os.environ.get("GSMAS_BACKEND", "numba").strip().lower()
    if wanted == "numpy":
        return "numpy", numpy_backend
    if wanted != "numba":
        raise ImportError(f"GSMAS_BACKEND must be 'numba' or 'numpy', got {wanted!r}")
    try:
        return "numba", numba_backend()
    except ImportError:
        return "numpy", numpy_backend


BACKEND, _impl = _select()

ml_detect_batch = _impl.ml_detect_batch
evm_batch = _impl.evm_batch
tree_predict_batch = _impl.tree_predict_batch
best_split = _impl.best_split
