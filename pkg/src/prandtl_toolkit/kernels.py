"""Backend selection for the hot loops.

The compiled extension is used when it imports; PRANDTL_TOOLKIT_PURE=1
forces the pure-Python fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("PRANDTL_TOOLKIT_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

rk4_blasius = _impl.rk4_blasius
rk4_blasius_end = _impl.rk4_blasius_end

__all__ = ["BACKEND", "rk4_blasius", "rk4_blasius_end"]
