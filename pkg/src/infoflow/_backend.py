"""Select the kernel implementation at import time.

The compiled extension is preferred; ``INFOFLOW_BACKEND=python`` forces the
numpy fallback (useful for benchmarking and for platforms without a compiler).
"""
import logging
import os

logger = logging.getLogger(__name__)

_requested = os.environ.get("INFOFLOW_BACKEND", "").strip().lower()

if _requested == "python":
    from infoflow import _pykernels as kernels

    BACKEND = "python"
else:
    try:
        from infoflow import _ckernels as kernels

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        logger.debug("compiled kernels unavailable, using numpy fallback")
        from infoflow import _pykernels as kernels

        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
