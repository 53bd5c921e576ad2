"""Kernel dispatch: compiled extension when available, pure Python otherwise.

Set ``STEADYTRUNC_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("STEADYTRUNC_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

interval_power_sums = _impl.interval_power_sums
ssa_chunk = _impl.ssa_chunk


def get_backend(name: str):
    """Return the kernel module ``"python"`` or ``"cython"`` (for benchmarks/tests)."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels as compiled  # type: ignore[attr-defined]

        return compiled
    raise ValueError(f"unknown kernel backend {name!r}")
