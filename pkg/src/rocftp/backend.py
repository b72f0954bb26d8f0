"""Backend selection: compiled kernels when available, pure Python otherwise.

The compiled extension accelerates the per-map inner loops for the built-in
finite chains.  Selection happens at import time, can be forced off with
the ROCFTP_PURE environment variable, and can be overridden per-process
with set_backend (the benchmark uses this to time both paths).  Both
backends consume stream words identically and produce identical output;
the test suite asserts that bit for bit.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

try:
    from . import _kernels
except ImportError:  # extension not built; run everything in Python
    _kernels = None

KIND_LAZY_WALK = 1
KIND_SORT = 2
KIND_ISING = 3

_MODE_AUTO = "auto"
_VALID_MODES = (_MODE_AUTO, "compiled", "pure")
_mode = _MODE_AUTO


@dataclass(frozen=True)
class KernelSpec:
    """Chain description consumed by the compiled kernels.

    kind selects the chain family; n0/n1 are small integers (state-space
    geometry) and the tables carry precomputed per-chain data.  Tables are
    built by the couplings in Python, so both backends share the exact
    same floating-point constants.
    """

    kind: int
    n0: int
    n1: int = 0
    table_i32: np.ndarray | None = None
    table_f64: np.ndarray | None = None


def have_compiled() -> bool:
    return _kernels is not None


def set_backend(mode: str) -> None:
    """Force 'compiled' or 'pure', or restore 'auto'."""
    global _mode
    if mode not in _VALID_MODES:
        raise ValueError(f"backend must be one of {_VALID_MODES}, got {mode!r}")
    if mode == "compiled" and _kernels is None:
        raise RuntimeError("compiled backend requested but extension not built")
    _mode = mode


def backend_mode() -> str:
    return _mode


def compiled_active() -> bool:
    """True when engine calls should dispatch to the compiled kernels."""
    if _mode == "compiled":
        return True
    if _mode == "pure":
        return False
    return _kernels is not None and not os.environ.get("ROCFTP_PURE")


def backend_name() -> str:
    return "compiled" if compiled_active() else "pure"


def kernels():
    if _kernels is None:
        raise RuntimeError("compiled kernels are not available")
    return _kernels
