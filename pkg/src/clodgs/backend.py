"""Compositing backend selection.

The compiled extension is preferred when importable; the NumPy fallback is
always available. Override with set_backend() or the CLODGS_BACKEND
environment variable ("cython" or "python").
"""

from __future__ import annotations

import os

from . import _kernel_py

try:
    from . import _kernel  # compiled extension, optional

    _HAVE_EXT = True
except ImportError:
    _kernel = None
    _HAVE_EXT = False

_MODULES = {"python": _kernel_py}
if _HAVE_EXT:
    _MODULES["cython"] = _kernel

_active = os.environ.get("CLODGS_BACKEND", "cython" if _HAVE_EXT else "python")
if _active not in _MODULES:
    raise ImportError(
        f"requested backend {_active!r} unavailable; have {sorted(_MODULES)}"
    )


def available_backends() -> list[str]:
    return sorted(_MODULES)


def get_backend() -> str:
    return _active


def set_backend(name: str) -> None:
    global _active
    if name not in _MODULES:
        raise ValueError(f"unknown backend {name!r}; have {sorted(_MODULES)}")
    _active = name


def kernel_module(name: str | None = None):
    return _MODULES[name or _active]
