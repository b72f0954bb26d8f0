"""Example chains packaged as grand couplings, plus the exact-law oracle."""

from __future__ import annotations

import numpy as np

from .ising import IsingCoupling
from .lazywalk import LazyWalkCoupling
from .sortperm import SortChainCoupling
from .toy import ConstantMapChain, IdentityMapChain, TwoStateMapChain

__all__ = [
    "IsingCoupling",
    "LazyWalkCoupling",
    "SortChainCoupling",
    "ConstantMapChain",
    "IdentityMapChain",
    "TwoStateMapChain",
    "exact_stationary",
    "make_chain",
    "CHAIN_NAMES",
]

CHAIN_NAMES = ("lazy-walk", "sort", "ising")

STATIONARY_RESIDUAL_TOL = 1e-12


def make_chain(name: str, *, n: int = 11, size: int = 2, beta: float = 0.3):
    """Build a registered chain by CLI name."""
    if name == "lazy-walk":
        return LazyWalkCoupling(n)
    if name == "sort":
        return SortChainCoupling(n)
    if name == "ising":
        return IsingCoupling(size, beta)
    raise ValueError(f"unknown chain {name!r}; expected one of {CHAIN_NAMES}")


def exact_stationary(coupling) -> np.ndarray:
    """Stationary distribution of the map-averaged transition matrix.

    Solves the left eigenproblem directly and verifies the residual, so
    the result is usable as an exact oracle in statistical tests.
    """
    p = np.asarray(coupling.transition_matrix(), dtype=float)
    n = p.shape[0]
    if p.shape != (n, n):
        raise ValueError("transition matrix must be square")
    rows = np.abs(p.sum(axis=1) - 1.0)
    if rows.max() > STATIONARY_RESIDUAL_TOL:
        raise ValueError("transition matrix rows must sum to 1")
    a = p.T - np.eye(n)
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(a, b)
    residual = float(np.abs(pi @ p - pi).sum())
    if residual > STATIONARY_RESIDUAL_TOL:
        raise ArithmeticError(
            f"stationary solve residual {residual:.3e} above tolerance"
        )
    return pi
