"""Lazy adjacent-transposition chain on permutations.

Each random map picks an adjacent position pair and an order (ascending or
descending) and puts that pair in the chosen order.  Both orders are
equally likely, which makes the chain doubly stochastic, so its stationary
distribution is uniform over all n! permutations.
"""

from __future__ import annotations

from itertools import permutations

import numpy as np

from ..backend import KIND_SORT, KernelSpec
from ..core import GrandCoupling

# Tracked sets hold explicit permutation sets, which is only sensible at
# test scale.
MAX_EXPLICIT_N = 5


class SortChainCoupling(GrandCoupling):
    def __init__(self, n: int):
        if n < 2:
            raise ValueError("need at least two items to sort")
        self.n = n
        self._n_maps = 2 * (n - 1)
        self._states: list[tuple[int, ...]] | None = None
        self._index: dict[tuple[int, ...], int] | None = None

    # Map descriptors: m in [0, 2(n-1)); position j = m >> 1, order
    # c = m & 1 (0 ascending, 1 descending).  One word each.
    def draw_map(self, stream) -> int:
        return stream.uniform_int(self._n_maps)

    def apply_map(self, desc: int, state: tuple[int, ...]) -> tuple[int, ...]:
        j = desc >> 1
        descending = desc & 1
        a, b = state[j], state[j + 1]
        if (a > b) != bool(descending):
            out = list(state)
            out[j], out[j + 1] = b, a
            return tuple(out)
        return state

    def apply_map_to_set(self, desc, sset):
        return {self.apply_map(desc, p) for p in sset}

    def full_state_set(self):
        if self.n > MAX_EXPLICIT_N:
            raise ValueError(
                f"explicit permutation sets are limited to n <= "
                f"{MAX_EXPLICIT_N} (test scale); got n = {self.n}"
            )
        return set(permutations(range(self.n)))

    def is_singleton(self, sset) -> bool:
        return len(sset) == 1

    def extract_element(self, sset):
        return next(iter(sset))

    def canonical_state(self) -> tuple[int, ...]:
        return tuple(range(self.n))

    def is_subset(self, a, b) -> bool:
        return a <= b

    def set_members(self, sset):
        return sset

    def _ensure_enumeration(self):
        if self._states is None:
            self._states = sorted(permutations(range(self.n)))
            self._index = {p: i for i, p in enumerate(self._states)}

    def enumerate_states(self) -> list[tuple[int, ...]]:
        self._ensure_enumeration()
        return list(self._states)

    def state_index(self, state) -> int:
        self._ensure_enumeration()
        return self._index[state]

    def state_from_index(self, ix: int):
        self._ensure_enumeration()
        return self._states[ix]

    def transition_matrix(self) -> np.ndarray:
        self._ensure_enumeration()
        n_states = len(self._states)
        weight = 1.0 / self._n_maps
        p = np.zeros((n_states, n_states))
        for i, perm in enumerate(self._states):
            for desc in range(self._n_maps):
                p[i, self._index[self.apply_map(desc, perm)]] += weight
        return p

    def kernel_spec(self) -> KernelSpec | None:
        if self.n > MAX_EXPLICIT_N:
            return None
        self._ensure_enumeration()
        n_states = len(self._states)
        tables = np.empty((self._n_maps, n_states), dtype=np.int32)
        for desc in range(self._n_maps):
            for i, perm in enumerate(self._states):
                tables[desc, i] = self._index[self.apply_map(desc, perm)]
        return KernelSpec(
            kind=KIND_SORT, n0=self.n, n1=n_states, table_i32=tables
        )

    def format_state(self, state) -> str:
        return "-".join(str(v) for v in state)

    def describe(self) -> str:
        return f"sort(n={self.n})"
