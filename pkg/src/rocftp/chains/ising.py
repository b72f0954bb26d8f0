"""Heat-bath Ising model on an L x L grid with free boundary."""

from __future__ import annotations

import math

import numpy as np

from ..backend import KIND_ISING, KernelSpec
from ..core import GrandCoupling

# Compiled kernels keep spin configurations in a 64-bit mask.
MAX_KERNEL_SITES = 64


class IsingCoupling(GrandCoupling):
    """Single-site heat bath, one random map per (site, uniform) pair.

    States are bitmasks: bit i set means spin +1 at site i (row-major).
    The heat-bath update is monotone in the neighbor field, so the same
    (site, u) pair applied to a componentwise-ordered pair of spin
    configurations keeps them ordered: tracked sets are sandwich pairs
    (lower mask, upper mask) and coalescence means the two masks meet.
    """

    def __init__(self, size: int, beta: float = 0.3):
        if size < 1:
            raise ValueError("grid size must be at least 1")
        if beta < 0.0:
            raise ValueError("beta must be nonnegative")
        self.size = size
        self.beta = beta
        self.n_sites = size * size
        self._full_mask = (1 << self.n_sites) - 1
        self._neighbors = self._build_neighbors(size)
        # P(new spin = +1 | neighbor field h) for h = -4..4; shared with
        # the compiled backend so both use identical doubles.
        self._p_plus = [
            1.0 / (1.0 + math.exp(-2.0 * beta * h)) for h in range(-4, 5)
        ]

    @staticmethod
    def _build_neighbors(size: int) -> list[tuple[int, ...]]:
        nbrs = []
        for r in range(size):
            for c in range(size):
                cell = []
                if r > 0:
                    cell.append((r - 1) * size + c)
                if r < size - 1:
                    cell.append((r + 1) * size + c)
                if c > 0:
                    cell.append(r * size + c - 1)
                if c < size - 1:
                    cell.append(r * size + c + 1)
                nbrs.append(tuple(cell))
        return nbrs

    # Map descriptors: (site, u); two words, site drawn first.
    def draw_map(self, stream):
        site = stream.uniform_int(self.n_sites)
        return site, stream.uniform01()

    def _field(self, state: int, site: int) -> int:
        h = 0
        for nb in self._neighbors[site]:
            h += 1 if (state >> nb) & 1 else -1
        return h

    def apply_map(self, desc, state: int) -> int:
        site, u = desc
        if u < self._p_plus[self._field(state, site) + 4]:
            return state | (1 << site)
        return state & ~(1 << site)

    def apply_map_to_set(self, desc, sset):
        lo, hi = sset
        return (self.apply_map(desc, lo), self.apply_map(desc, hi))

    def full_state_set(self):
        return (0, self._full_mask)

    def is_singleton(self, sset) -> bool:
        return sset[0] == sset[1]

    def extract_element(self, sset) -> int:
        return sset[0]

    def canonical_state(self) -> int:
        return 0

    def is_subset(self, a, b) -> bool:
        return (b[0] & ~a[0]) == 0 and (a[1] & ~b[1]) == 0

    def set_members(self, sset):
        lo, hi = sset
        free = [i for i in range(self.n_sites) if not (lo >> i) & 1 and (hi >> i) & 1]
        for pick in range(1 << len(free)):
            s = lo
            for j, site in enumerate(free):
                if (pick >> j) & 1:
                    s |= 1 << site
            yield s

    def enumerate_states(self) -> list[int]:
        return list(range(1 << self.n_sites))

    def state_index(self, state: int) -> int:
        return state

    def state_from_index(self, ix: int) -> int:
        return ix

    def transition_matrix(self) -> np.ndarray:
        n_states = 1 << self.n_sites
        site_weight = 1.0 / self.n_sites
        p = np.zeros((n_states, n_states))
        for s in range(n_states):
            for site in range(self.n_sites):
                plus = self._p_plus[self._field(s, site) + 4]
                p[s, s | (1 << site)] += site_weight * plus
                p[s, s & ~(1 << site)] += site_weight * (1.0 - plus)
        return p

    def kernel_spec(self) -> KernelSpec | None:
        if self.n_sites > MAX_KERNEL_SITES:
            return None
        table = np.full((self.n_sites, 5), -1, dtype=np.int32)
        for site, nbrs in enumerate(self._neighbors):
            table[site, 0] = len(nbrs)
            for j, nb in enumerate(nbrs):
                table[site, j + 1] = nb
        return KernelSpec(
            kind=KIND_ISING,
            n0=self.n_sites,
            n1=self.size,
            table_i32=table,
            table_f64=np.array(self._p_plus),
        )

    def format_state(self, state: int) -> str:
        return "".join(
            "+" if (state >> i) & 1 else "-" for i in range(self.n_sites)
        )

    def describe(self) -> str:
        return f"ising(size={self.size}, beta={self.beta})"
