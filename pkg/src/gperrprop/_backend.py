"""Select the kernel core at import time.

The compiled extension is preferred. Set ``GPERRPROP_PURE_PYTHON=1`` to
force the NumPy fallback. Above ``COMPILED_MAX_DIM`` input dimensions the
inner products are better served by BLAS, so calls route to NumPy even
when the extension is loaded.
"""
import os

from . import _pykernels

BACKEND = "python"
COMPILED_MAX_DIM = 16
_impl = _pykernels

if os.environ.get("GPERRPROP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels


def _pick(A):
    return _impl if A.shape[1] <= COMPILED_MAX_DIM else _pykernels


def rbf_matrix(A, B, length_scale):
    return _pick(A).rbf_matrix(A, B, length_scale)


def rbf_mean(T, X, alpha, length_scale):
    return _pick(T).rbf_mean(T, X, alpha, length_scale)


def rbf_mean_grad(T, X, alpha, length_scale):
    return _pick(T).rbf_mean_grad(T, X, alpha, length_scale)
