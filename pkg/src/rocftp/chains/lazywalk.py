"""Lazy nearest-neighbor walk on {0..n-1} with reflecting ends."""

from __future__ import annotations

import numpy as np

from ..backend import KIND_LAZY_WALK, KernelSpec
from ..core import GrandCoupling


class LazyWalkCoupling(GrandCoupling):
    """Hold with probability 1/2, step +-1 with probability 1/4 each.

    A step off either end stays put.  The random map moves every state by
    the same increment, which is monotone, so a tracked set is just the
    interval (lo, hi) of its extremes and coalescence detection via the
    interval is exact.
    """

    def __init__(self, n_states: int):
        if n_states < 1:
            raise ValueError("need at least one state")
        self.n_states = n_states
        self._top = n_states - 1

    # Map descriptors: 0,1 hold; 2 steps down; 3 steps up.  One word each.
    def draw_map(self, stream) -> int:
        return stream.uniform_int(4)

    def apply_map(self, desc: int, state: int) -> int:
        if desc == 2:
            return state - 1 if state > 0 else 0
        if desc == 3:
            return state + 1 if state < self._top else self._top
        return state

    def apply_map_to_set(self, desc, sset):
        lo, hi = sset
        return (self.apply_map(desc, lo), self.apply_map(desc, hi))

    def full_state_set(self):
        return (0, self._top)

    def is_singleton(self, sset) -> bool:
        return sset[0] == sset[1]

    def extract_element(self, sset) -> int:
        return sset[0]

    def canonical_state(self) -> int:
        return 0

    def is_subset(self, a, b) -> bool:
        return b[0] <= a[0] and a[1] <= b[1]

    def set_members(self, sset):
        return range(sset[0], sset[1] + 1)

    def enumerate_states(self) -> list[int]:
        return list(range(self.n_states))

    def state_index(self, state: int) -> int:
        return state

    def state_from_index(self, ix: int) -> int:
        return ix

    def transition_matrix(self) -> np.ndarray:
        n = self.n_states
        p = np.zeros((n, n))
        for x in range(n):
            p[x, x] += 0.5
            p[x, max(x - 1, 0)] += 0.25
            p[x, min(x + 1, n - 1)] += 0.25
        return p

    def kernel_spec(self) -> KernelSpec:
        return KernelSpec(kind=KIND_LAZY_WALK, n0=self._top)

    def describe(self) -> str:
        return f"lazy-walk(n_states={self.n_states})"
