"""Hot loops with a compiled Cython backend and a pure-Python fallback.

The compiled module is used when importable; set ``SAFEFLOW_PURE_PYTHON=1``
to force the fallback.  ``BACKEND`` names the active implementation.
"""

import os

from . import _pykernels as python_backend

compiled_backend = None
if os.environ.get("SAFEFLOW_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

mces_search = _active.mces_search
euler_sample = _active.euler_sample

__all__ = ["BACKEND", "compiled_backend", "python_backend", "mces_search", "euler_sample"]
