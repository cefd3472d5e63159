"""Hot-kernel backend selection.

The compiled Cython extension is preferred when present; the pure NumPy
reference implementation is the fallback.  Set HYSTK_PURE_PYTHON=1 to force
the fallback (used by the benchmark and the backend-equivalence tests).
"""

import os

from . import reference

if os.environ.get("HYSTK_PURE_PYTHON"):
    _impl = reference
else:
    try:
        from . import _fastcore as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = reference

sweep_classic = _impl.sweep_classic
rk4_matrix_chain = _impl.rk4_matrix_chain
BACKEND_NAME = _impl.BACKEND_NAME


def backend() -> str:
    """Name of the active kernel backend ('cython' or 'python')."""
    return BACKEND_NAME
