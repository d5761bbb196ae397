"""Backend selection for the hot kernels.

The compiled Cython module is used when it imports; otherwise the numpy
fallback is. Set ``MOTIFSIFT_BACKEND=python`` to force the fallback.
"""
import contextlib
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels


def available():
    return sorted(_BACKENDS)


def _initial():
    wanted = os.environ.get("MOTIFSIFT_BACKEND", "").strip().lower()
    if wanted:
        if wanted not in _BACKENDS:
            raise ImportError(f"MOTIFSIFT_BACKEND={wanted!r} is not available (have {available()})")
        return wanted
    return "cython" if "cython" in _BACKENDS else "python"


_active_name = _initial()


def active():
    """The kernel module currently in use."""
    return _BACKENDS[_active_name]


def backend_name():
    return _active_name


def set_backend(name):
    global _active_name
    if name not in _BACKENDS:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {available()}")
    _active_name = name


@contextlib.contextmanager
def using(name):
    previous = _active_name
    set_backend(name)
    try:
        yield active()
    finally:
        set_backend(previous)
