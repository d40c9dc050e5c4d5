"""Kernel backend selection.

The compiled ``_ckernel`` extension is used when it imports; otherwise the
pure-Python ``_pykernel`` stands in.  ``RADLOC_BACKEND=python`` forces the
fallback, ``RADLOC_BACKEND=cython`` makes a missing extension an error.
"""

import os

from radloc import _pykernel

_requested = os.environ.get("RADLOC_BACKEND", "auto").lower()

compiled = None
if _requested != "python":
    try:
        from radloc import _ckernel as compiled
    except ImportError:
        if _requested == "cython":
            raise
        compiled = None

kernel = compiled if compiled is not None else _pykernel
BACKEND = "cython" if compiled is not None else "python"

REASON_CONVERGED = _pykernel.REASON_CONVERGED
REASON_MAX_ITERATIONS = _pykernel.REASON_MAX_ITERATIONS
REASON_DEGENERATE = _pykernel.REASON_DEGENERATE


def get_kernel(name=None):
    """Return the kernel module ``name`` ("python" or "cython"), default active."""
    if name is None:
        return kernel
    if name == "python":
        return _pykernel
    if name == "cython":
        if compiled is None:
            raise ImportError("compiled kernel radloc._ckernel is not built")
        return compiled
    raise ValueError(f"unknown backend {name!r}")
