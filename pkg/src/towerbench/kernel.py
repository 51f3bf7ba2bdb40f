"""Tick-kernel selection: the compiled core when importable, else pure Python.

Set ``TOWERBENCH_PURE=1`` to force the Python implementation.
"""
import os

from . import _kernel_py

BACKEND = "python"
run_ticks = _kernel_py.run_ticks

if os.environ.get("TOWERBENCH_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernel as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        run_ticks = _compiled.run_ticks
        BACKEND = "cython"


def backends():
    """Map of available backend name -> run_ticks implementation."""
    out = {"python": _kernel_py.run_ticks}
    try:
        from . import _kernel as compiled
    except ImportError:
        return out
    out["cython"] = compiled.run_ticks
    return out
