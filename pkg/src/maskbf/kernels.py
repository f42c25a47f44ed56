"""Backend selection for the batched linear-algebra kernels.

The compiled extension is used when it imports; otherwise the numpy fallback
is used. Set ``MASKBF_PURE_PYTHON=1`` to force the fallback.
"""
import os
import warnings

from . import _fallback

BACKEND = "python"

if os.environ.get("MASKBF_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        warnings.warn(
            "Could not import compiled maskbf._kernels; falling back to the "
            "numpy implementation. Rebuild with `pip install -e .` to enable it.",
            RuntimeWarning,
        )
        _impl = _fallback
    else:
        BACKEND = "compiled"

# the compiled eigen-solvers use fixed-size scratch space
MAX_COMPILED_DIM = 16


def heev_batch(a):
    if a.shape[-1] > MAX_COMPILED_DIM:
        return _fallback.heev_batch(a)
    return _impl.heev_batch(a)


def gev_batch(a, b):
    if a.shape[-1] > MAX_COMPILED_DIM:
        return _fallback.gev_batch(a, b)
    return _impl.gev_batch(a, b)


weighted_cov = _impl.weighted_cov

__all__ = ["BACKEND", "heev_batch", "gev_batch", "weighted_cov"]
