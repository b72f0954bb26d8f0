"""Tiny chains used by tests and negative controls."""

from __future__ import annotations

import numpy as np

from ..core import GrandCoupling


class TwoStateMapChain(GrandCoupling):
    """Chain on {0, 1} driven by an explicit map distribution.

    Maps are identity, swap, and the two constant maps, drawn with the
    given probabilities.  Constant maps coalesce everything at once, and
    the asymmetry between them separates the stationary distribution from
    the law produced by composing maps in the wrong order, which makes
    this the canonical negative control.
    """

    def __init__(
        self,
        p_identity: float = 0.3,
        p_swap: float = 0.3,
        p_const0: float = 0.1,
        p_const1: float = 0.3,
    ):
        probs = (p_identity, p_swap, p_const0, p_const1)
        if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError("map probabilities must be >= 0 and sum to 1")
        self.probs = probs
        self._cut1 = p_identity
        self._cut2 = p_identity + p_swap
        self._cut3 = p_identity + p_swap + p_const0

    # Map descriptors: 0 identity, 1 swap, 2 const-0, 3 const-1; one word.
    def draw_map(self, stream) -> int:
        u = stream.uniform01()
        if u < self._cut1:
            return 0
        if u < self._cut2:
            return 1
        if u < self._cut3:
            return 2
        return 3

    def apply_map(self, desc: int, state: int) -> int:
        if desc == 0:
            return state
        if desc == 1:
            return 1 - state
        return desc - 2

    def apply_map_to_set(self, desc, sset):
        return frozenset(self.apply_map(desc, s) for s in sset)

    def full_state_set(self):
        return frozenset((0, 1))

    def is_singleton(self, sset) -> bool:
        return len(sset) == 1

    def extract_element(self, sset) -> int:
        return next(iter(sset))

    def canonical_state(self) -> int:
        return 0

    def is_subset(self, a, b) -> bool:
        return a <= b

    def set_members(self, sset):
        return sset

    def enumerate_states(self) -> list[int]:
        return [0, 1]

    def state_index(self, state: int) -> int:
        return state

    def state_from_index(self, ix: int) -> int:
        return ix

    def transition_matrix(self) -> np.ndarray:
        p_id, p_swap, p_c0, p_c1 = self.probs
        return np.array(
            [
                [p_id + p_c0, p_swap + p_c1],
                [p_swap + p_c0, p_id + p_c1],
            ]
        )

    def describe(self) -> str:
        return f"two-state(probs={self.probs})"


class ConstantMapChain(GrandCoupling):
    """Every random map is constant: coalescence after a single map."""

    def __init__(self, n_states: int = 3):
        if n_states < 1:
            raise ValueError("need at least one state")
        self.n_states = n_states

    def draw_map(self, stream) -> int:
        return stream.uniform_int(self.n_states)

    def apply_map(self, desc: int, state: int) -> int:
        return desc

    def apply_map_to_set(self, desc, sset):
        return frozenset((desc,))

    def full_state_set(self):
        return frozenset(range(self.n_states))

    def is_singleton(self, sset) -> bool:
        return len(sset) == 1

    def extract_element(self, sset) -> int:
        return next(iter(sset))

    def canonical_state(self) -> int:
        return 0

    def enumerate_states(self) -> list[int]:
        return list(range(self.n_states))

    def state_index(self, state: int) -> int:
        return state

    def state_from_index(self, ix: int) -> int:
        return ix

    def transition_matrix(self) -> np.ndarray:
        n = self.n_states
        return np.full((n, n), 1.0 / n)

    def describe(self) -> str:
        return f"constant-map(n_states={self.n_states})"


class IdentityMapChain(GrandCoupling):
    """Every random map is the identity: coalescence never happens.

    Exists to exercise the non-coalescence caps.  Each map still consumes
    one word so that positions advance.
    """

    def __init__(self, n_states: int = 2):
        if n_states < 2:
            raise ValueError("need at least two states for non-coalescence")
        self.n_states = n_states

    def draw_map(self, stream) -> int:
        return stream.uniform_int(1)

    def apply_map(self, desc: int, state: int) -> int:
        return state

    def apply_map_to_set(self, desc, sset):
        return sset

    def full_state_set(self):
        return frozenset(range(self.n_states))

    def is_singleton(self, sset) -> bool:
        return len(sset) == 1

    def extract_element(self, sset) -> int:
        return next(iter(sset))

    def canonical_state(self) -> int:
        return 0

    def enumerate_states(self) -> list[int]:
        return list(range(self.n_states))

    def state_index(self, state: int) -> int:
        return state

    def state_from_index(self, ix: int) -> int:
        return ix

    def transition_matrix(self) -> np.ndarray:
        return np.eye(self.n_states)

    def describe(self) -> str:
        return f"identity-map(n_states={self.n_states})"
