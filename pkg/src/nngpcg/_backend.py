"""Kernel backend selection.

The compiled Cython kernels are used when importable; otherwise, or when
``NNGPCG_BACKEND=python`` is set, the pure-Python fallback is used.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels

_compiled: ModuleType | None
try:
    from . import _ckernels as _compiled
except ImportError:  # extension not built
    _compiled = None

AVAILABLE: dict[str, ModuleType] = {"python": _pykernels}
if _compiled is not None:
    AVAILABLE["cython"] = _compiled

_requested = os.environ.get("NNGPCG_BACKEND", "").strip().lower()
if _requested and _requested not in AVAILABLE:
    raise ImportError(f"NNGPCG_BACKEND={_requested!r} is not available; have {sorted(AVAILABLE)}")

BACKEND: str = _requested or ("cython" if _compiled is not None else "python")
kernels: ModuleType = AVAILABLE[BACKEND]


def use(name: str) -> None:
    """Switch the active backend for the whole process (used by tests and benchmarks)."""
    global BACKEND, kernels
    if name not in AVAILABLE:
        raise ValueError(f"backend {name!r} not available; have {sorted(AVAILABLE)}")
    BACKEND = name
    kernels = AVAILABLE[name]
