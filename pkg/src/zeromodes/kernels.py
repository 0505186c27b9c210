"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback is used. Set ``ZEROMODES_KERNELS=python`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
wigner_d_rows = _kernels_py.wigner_d_rows

if os.environ.get("ZEROMODES_KERNELS", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:  # pragma: no cover - depends on build
        _compiled = None
    if _compiled is not None:
        wigner_d_rows = _compiled.wigner_d_rows
        BACKEND = "cython"


def backends():
    """Map of available backend name -> ``wigner_d_rows`` implementation."""
    out = {"python": _kernels_py.wigner_d_rows}
    try:
        from . import _kernels as compiled
    except ImportError:  # pragma: no cover
        return out
    out["cython"] = compiled.wigner_d_rows
    return out
