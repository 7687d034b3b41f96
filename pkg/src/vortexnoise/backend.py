"""Kernel backend selection.

Hot numeric kernels exist in two variants: a numba ``@njit`` version and a
pure-numpy fallback.  The active backend is chosen once from the environment
variable ``VORTEXNOISE_NUMBA``:

    VORTEXNOISE_NUMBA=1      force numba (error if unavailable)
    VORTEXNOISE_NUMBA=0      force the numpy fallback
    unset / "auto"           numba when importable, else numpy

``set_backend`` overrides the choice at runtime (used by tests and the
benchmark harness).  Thread caps for FFT work come from
``VORTEXNOISE_THREADS``.
"""

from __future__ import annotations

import os

_FORCED: str | None = None
_CACHED: str | None = None


def _probe_numba() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def active_backend() -> str:
    """Return "numba" or "numpy"."""
    global _CACHED
    if _FORCED is not None:
        return _FORCED
    if _CACHED is None:
        flag = os.environ.get("VORTEXNOISE_NUMBA", "auto").strip().lower()
        if flag in ("1", "true", "numba"):
            if not _probe_numba():
                raise ImportError("VORTEXNOISE_NUMBA=1 but numba is not importable")
            _CACHED = "numba"
        elif flag in ("0", "false", "numpy"):
            _CACHED = "numpy"
        else:
            _CACHED = "numba" if _probe_numba() else "numpy"
    return _CACHED


def set_backend(name: str | None) -> None:
    """Force a backend ("numba" / "numpy"), or None to restore env-based choice."""
    global _FORCED
    if name is not None and name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    _FORCED = name


def thread_count() -> int:
    """Worker cap for FFTs and path fan-out (VORTEXNOISE_THREADS, default 1)."""
    raw = os.environ.get("VORTEXNOISE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)
