"""Kernel selection: compiled extension when available, Python otherwise.

Set ``BBSRC_PURE_PYTHON=1`` before import to force the fallback.
"""
import os
import warnings

from . import _cd_py

BACKEND = "python"

if os.environ.get("BBSRC_PURE_PYTHON") == "1":
    _impl = _cd_py
else:
    try:
        from . import _cd as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        warnings.warn(
            "bbsrc._cd extension not available; using the pure-Python kernels",
            RuntimeWarning,
            stacklevel=2,
        )
        _impl = _cd_py

lasso_cd = _impl.lasso_cd
bpdn_gram = _impl.bpdn_gram

__all__ = ["BACKEND", "lasso_cd", "bpdn_gram"]
