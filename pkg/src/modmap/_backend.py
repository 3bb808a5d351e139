"""Pick the compiled kernels when available, else the pure-Python ones.

Set ``MODMAP_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

kernels = _pykernels
NAME = "python"

if os.environ.get("MODMAP_PURE_PYTHON", "0") in ("", "0"):
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        kernels = _kernels
        NAME = "cython"


def thread_count() -> int:
    """Worker count from ``MODMAP_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("MODMAP_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return n
