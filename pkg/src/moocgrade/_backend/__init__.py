"""Kernel backend selection: compiled extension with pure-python fallback.

The compiled module is optional; when it is missing (no compiler at install
time) the numpy kernels take over with identical tree-building results and
statistically equivalent embedding training. Selection happens at import and
may be overridden with the MOOCGRADE_BACKEND environment variable
("compiled" or "python") or at runtime via set_backend(), which the
benchmark and the cross-backend tests use.
"""

import os

from . import pykernels

try:
    from . import _ckernels
except ImportError:
    _ckernels = None

_BACKENDS = {"python": pykernels}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels

_requested = os.environ.get("MOOCGRADE_BACKEND")
if _requested:
    if _requested not in _BACKENDS:
        raise ImportError(
            f"MOOCGRADE_BACKEND={_requested!r} unavailable; "
            f"choices: {sorted(_BACKENDS)}")
    _active = _BACKENDS[_requested]
else:
    _active = _BACKENDS.get("compiled", pykernels)


def get():
    """Return the active kernel module."""
    return _active


def set_backend(name: str):
    """Switch the active kernel module ("compiled" or "python")."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(
            f"backend {name!r} unavailable; choices: {sorted(_BACKENDS)}")
    _active = _BACKENDS[name]


def active_name() -> str:
    return "compiled" if _active is not pykernels else "python"


def available() -> list[str]:
    return sorted(_BACKENDS)
