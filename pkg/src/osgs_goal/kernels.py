"""Backend selection for the element kernels.

The compiled extension is used when it imports; otherwise the numpy
implementation. ``OSGS_GOAL_BACKEND=python`` forces the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("OSGS_GOAL_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "compiled"

_threads = 1


def set_threads(n):
    global _threads
    _threads = max(1, int(n))


def get_backend(name=None):
    """Kernel module by name (``compiled`` / ``python``), or the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "compiled":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")


def element_matrices(*args, backend=None):
    return get_backend(backend).element_matrices(*args, threads=_threads)


def element_estimators(*args, backend=None):
    return get_backend(backend).element_estimators(*args, threads=_threads)
