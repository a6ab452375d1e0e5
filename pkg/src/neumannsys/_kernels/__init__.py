"""Hot kernels: compiled extension when built, numpy fallback otherwise.

``BACKEND`` names the active implementation ("cython" or "numpy").  Set
``NEUMANNSYS_PURE_PYTHON=1`` before import to force the fallback.
"""
import os

from . import _pykernels as numpy_backend

compiled_backend = None
if os.environ.get("NEUMANNSYS_PURE_PYTHON", "") != "1":
    try:
        from . import _ckernels as compiled_backend
    except ImportError:
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else numpy_backend
BACKEND = "cython" if compiled_backend is not None else "numpy"

stencil_apply = _active.stencil_apply
log_coupled = _active.log_coupled
log_coupled_hessian = _active.log_coupled_hessian
block_hessian_apply = _active.block_hessian_apply
block_minres = _active.block_minres

__all__ = ["BACKEND", "stencil_apply", "log_coupled", "log_coupled_hessian",
           "block_hessian_apply", "block_minres", "numpy_backend", "compiled_backend"]
