"""Backend selection for the per-iteration kernels.

The compiled extension is preferred when it imported cleanly; the
pure-numpy twin is the fallback.  Set ``RISFP_BACKEND=python`` or
``=cython`` to force one (forcing an unavailable backend raises).
"""

from __future__ import annotations

import os

from . import _fp_py

try:
    from . import _fp_cy
except ImportError:  # extension not built on this install
    _fp_cy = None

_BACKENDS = {"python": _fp_py}
if _fp_cy is not None:
    _BACKENDS["cython"] = _fp_cy


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def get_backend(name: str | None = None):
    """Resolve a backend module by name, env var, or availability."""
    if name is None or name == "auto":
        name = os.environ.get("RISFP_BACKEND", "auto")
    if name == "auto" or name is None:
        return _BACKENDS.get("cython", _fp_py)
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"backend {name!r} is not available (have: {', '.join(available_backends())})"
        ) from None


def default_backend_name() -> str:
    return get_backend().BACKEND_NAME
