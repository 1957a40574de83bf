"""Select the compute backend at import time.

The compiled OpenMP core is used when importable; ``HD_MMD_BACKEND=python``
forces the numpy fallback.  ``HD_MMD_THREADS`` caps thread counts everywhere.
"""

import os

from . import _fallback

_requested = os.environ.get("HD_MMD_BACKEND", "auto").lower()

if _requested == "python":
    core = _fallback
    BACKEND = "python"
else:
    try:
        from ._ext import _core as core

        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        core = _fallback
        BACKEND = "python"


def default_threads():
    """Worker count: ``HD_MMD_THREADS`` if set, else the CPU count."""
    env = os.environ.get("HD_MMD_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


def get_core(name=None):
    """Return a backend module by name (``"compiled"`` / ``"python"``)."""
    if name is None:
        return core
    if name == "python":
        return _fallback
    if name == "compiled":
        from ._ext import _core

        return _core
    raise ValueError(f"unknown backend {name!r}")
