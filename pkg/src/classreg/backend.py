"""Kernel backend selection.

The 3D convolution forward/backward loops dominate runtime, so they exist
twice: numba @njit loop nests (`_kernels_numba`) and a pure-numpy fallback
with identical per-element accumulation order (`_kernels_numpy`). The two
paths produce bit-identical results; `benchmarks/compare_backends.py` shows
the speed difference.

Selection, in order:
  1. env var CLASSREG_BACKEND = "numba" | "numpy"
  2. default: numba when importable, else numpy

`set_backend()` overrides at runtime (used by tests and benchmarks).

CLASSREG_THREADS is accepted for forward compatibility; execution is
single-threaded in this version (the default of 1) so results stay
bit-exact.
"""

from __future__ import annotations

import os

from .errors import ConfigError

_VALID = ("numba", "numpy")
_backend: str | None = None


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def _default_backend() -> str:
    env = os.environ.get("CLASSREG_BACKEND")
    if env is not None:
        if env not in _VALID:
            raise ConfigError(
                f"CLASSREG_BACKEND must be one of {_VALID}, got {env!r}"
            )
        if env == "numba" and not _numba_available():
            raise ConfigError("CLASSREG_BACKEND=numba but numba is not importable")
        return env
    return "numba" if _numba_available() else "numpy"


def get_backend() -> str:
    global _backend
    if _backend is None:
        _backend = _default_backend()
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in _VALID:
        raise ConfigError(f"backend must be one of {_VALID}, got {name!r}")
    if name == "numba" and not _numba_available():
        raise ConfigError("numba backend requested but numba is not importable")
    _backend = name


def kernels():
    """Return the active kernel module."""
    if get_backend() == "numba":
        from . import _kernels_numba

        return _kernels_numba
    from . import _kernels_numpy

    return _kernels_numpy


def max_threads() -> int:
    raw = os.environ.get("CLASSREG_THREADS")
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"CLASSREG_THREADS must be an integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError(f"CLASSREG_THREADS must be >= 1, got {value}")
    return value
