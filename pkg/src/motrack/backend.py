"""Sampling-kernel backend selection.

The compiled kernel is preferred when its extension module built; the pure
Python reference kernel is always available as a fallback.  Both produce
identical results for the same inputs (see tests), so the choice only
affects speed.  Set MOTRACK_BACKEND=python|cython to force one.
"""

from __future__ import annotations

import os

from . import _chain_py
from .errors import ConfigError

_KERNELS = {"python": _chain_py.run_chain_kernel}

try:
    from . import _chain_cy

    _KERNELS["cython"] = _chain_cy.run_chain_kernel
except ImportError:  # extension not built; fall back silently
    _chain_cy = None


def available_backends() -> list[str]:
    return sorted(_KERNELS)


def active_name() -> str:
    """Resolve the default backend, honoring the MOTRACK_BACKEND override."""
    forced = os.environ.get("MOTRACK_BACKEND", "").strip().lower()
    if forced:
        if forced not in _KERNELS:
            raise ConfigError(
                f"MOTRACK_BACKEND={forced!r} is not available; "
                f"choose from {available_backends()}"
            )
        return forced
    return "cython" if "cython" in _KERNELS else "python"


def get_kernel(name: str | None = None):
    """Return the kernel callable for ``name`` (None/'auto' = default)."""
    if name in (None, "", "auto"):
        name = active_name()
    name = name.lower()
    if name not in _KERNELS:
        raise ConfigError(f"unknown backend {name!r}; choose from {available_backends()}")
    return _KERNELS[name]


def resolve_name(name: str | None = None) -> str:
    if name in (None, "", "auto"):
        return active_name()
    if name.lower() not in _KERNELS:
        raise ConfigError(f"unknown backend {name!r}; choose from {available_backends()}")
    return name.lower()
