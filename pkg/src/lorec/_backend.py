"""Kernel selection: compiled core when available, numpy fallback otherwise.

The default backend is chosen once at import. Set ``LOREC_BACKEND`` to
``compiled`` or ``python`` to force one (forcing ``compiled`` raises if the
extension is missing); ``auto`` restores the default behaviour.
"""

from __future__ import annotations

import os

from . import _core_py

try:
    from . import _core
except ImportError:
    _core = None

_KERNELS = {"python": _core_py}
if _core is not None:
    _KERNELS["compiled"] = _core


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_KERNELS))


def get_kernel(name: str | None = None):
    """Return the kernel module for `name` (None means the default)."""
    if name is None:
        name = _DEFAULT
    try:
        return _KERNELS[name]
    except KeyError:
        raise ValueError(
            f"unknown solver backend {name!r}; available: {available_backends()}"
        ) from None


def default_backend() -> str:
    return _DEFAULT


def _pick_default() -> str:
    choice = os.environ.get("LOREC_BACKEND", "auto").strip().lower()
    if choice in ("", "auto"):
        return "compiled" if _core is not None else "python"
    if choice not in _KERNELS:
        raise ImportError(
            f"LOREC_BACKEND={choice!r} is not available; "
            f"built backends: {available_backends()}"
        )
    return choice


_DEFAULT = _pick_default()
