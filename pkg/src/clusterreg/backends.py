"""EM backend selection.

The compiled Cython kernel is preferred; the pure-NumPy implementation in
`_em_py` is the fallback when the extension is missing. Set the environment
variable ``CLUSTERREG_BACKEND=python`` (or ``compiled``) before import to
force a choice, or call `set_backend` at runtime (used by the tests and the
backend benchmark).
"""

from __future__ import annotations

import os

from . import _em_py

try:
    from . import _em_kernel
except ImportError:  # pragma: no cover - depends on the build
    _em_kernel = None

_BACKENDS = {"python": _em_py}
if _em_kernel is not None:
    _BACKENDS["compiled"] = _em_kernel


def _initial():
    forced = os.environ.get("CLUSTERREG_BACKEND")
    if forced:
        if forced not in _BACKENDS:
            raise ImportError(
                f"CLUSTERREG_BACKEND={forced!r} but available backends are {sorted(_BACKENDS)}"
            )
        return _BACKENDS[forced]
    return _BACKENDS.get("compiled", _em_py)


_active = _initial()


def active_backend():
    """The module currently providing ``em_run`` (has a ``name`` attribute)."""
    return _active


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def set_backend(name: str):
    """Switch backend by name ('compiled' or 'python'); returns the module."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; available: {sorted(_BACKENDS)}")
    _active = _BACKENDS[name]
    return _active


def em_run(*args, **kwargs):
    return _active.em_run(*args, **kwargs)
