"""Backend selection for the compiled hot-path kernels.

The compiled extension (`quadmmpc._core`) implements the plant RK4 step
and the dual active-set QP solver in C; `quadmmpc._purepy` holds the
reference NumPy implementations with identical semantics.  Selection
happens once at import:

* ``QUADMMPC_BACKEND=py``     force the pure-Python kernels,
* ``QUADMMPC_BACKEND=c``      require the compiled kernels (ImportError
  if the extension is missing),
* unset                        compiled if importable, else pure Python.
"""

import os

_requested = os.environ.get("QUADMMPC_BACKEND", "").lower()

if _requested == "py":
    from . import _purepy as kernels
    _BACKEND = "python"
elif _requested == "c":
    from . import _core as kernels  # noqa: F401
    _BACKEND = "compiled"
else:
    try:
        from . import _core as kernels  # noqa: F401
        _BACKEND = "compiled"
    except ImportError:
        from . import _purepy as kernels
        _BACKEND = "python"


def backend_name() -> str:
    """Which kernel backend this process is using: 'compiled' or 'python'."""
    return _BACKEND
