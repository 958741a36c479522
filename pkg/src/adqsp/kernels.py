"""Backend selection for the hot iteration loops.

The compiled extension is used when it was built; otherwise, or when the
environment variable ``ADQSP_PURE_PYTHON`` is set to a non-empty value,
the numpy implementation is used. Both expose the same two functions.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("ADQSP_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py

plain_iterate = _impl.plain_iterate
adqsp_iterate = _impl.adqsp_iterate


def available_backends():
    """Map backend name to module for every importable backend."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels

        out["cython"] = _kernels
    except ImportError:
        pass
    return out
