"""Stepping-kernel backend selection.

The compiled extension (``volcal._stepping_cy``) and the numpy reference
implementation (``volcal._stepping_py``) expose the same five kernels; the
fastest available one is picked at import time.  Set VOLCAL_BACKEND to
``numpy`` or ``cython`` to force a choice (``cython`` raises if the
extension is not built).
"""

from __future__ import annotations

import os

from . import _stepping_py

_requested = os.environ.get("VOLCAL_BACKEND", "auto").lower()

if _requested == "numpy":
    _impl = _stepping_py
elif _requested == "cython":
    from . import _stepping_cy as _impl  # raises ImportError if not built
elif _requested == "auto":
    try:
        from . import _stepping_cy as _impl
    except ImportError:
        _impl = _stepping_py
else:
    raise ImportError(f"unknown VOLCAL_BACKEND={_requested!r} (use auto|numpy|cython)")

forward_sweep = _impl.forward_sweep
adjoint_sweep = _impl.adjoint_sweep
gradient_assemble = _impl.gradient_assemble
adjoint_pde_sweep = _impl.adjoint_pde_sweep
curvature_minus_slope = _stepping_py.curvature_minus_slope


def backend_name():
    """Name of the active kernel backend ('numpy' or 'cython')."""
    return _impl.BACKEND_NAME
