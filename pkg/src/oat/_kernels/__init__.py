"""Hot kernels, compiled when available.

Set ``OAT_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

from . import _series_py

BACKEND = "python"
binomial_series = _series_py.binomial_series

if not os.environ.get("OAT_PURE_PYTHON"):
    try:
        from ._cseries import binomial_series  # noqa: F811
        BACKEND = "compiled"
    except ImportError:
        pass

__all__ = ["BACKEND", "binomial_series"]
