"""Backend switch for the hot kernels.

Kernels are written once as plain Python loops and compiled with numba when
it is available and enabled. Setting ``COLLISION_REPLAY_NUMBA=0`` selects the
vectorized pure-numpy fallbacks instead. Both paths consume identical
pre-drawn random numbers, so results do not depend on the backend.
"""
from __future__ import annotations

import os

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

_FLAG = os.environ.get("COLLISION_REPLAY_NUMBA", "1").strip().lower()
USE_NUMBA = _numba is not None and _FLAG not in ("0", "false", "no", "off")
HAVE_NUMBA = _numba is not None


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity otherwise."""
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    if _numba is None:
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f
    return _numba.njit(*args, **kwargs)


def thread_cap() -> int:
    raw = os.environ.get("COLLISION_REPLAY_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
