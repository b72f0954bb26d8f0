"""Grand couplings and composition of random maps into the past.

A grand coupling packages a Markov chain as a random map on the whole state
space: drawing one map and applying it everywhere is the update step all
engines share.  Set-valued application tracks a superset of the image of
the composed map, so a singleton set certifies coalescence.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, NamedTuple

from .errors import CapExceededError, NonCoalescenceError

DEFAULT_MAP_CAP = 10**6
DEFAULT_STATE_CAP = 10**4


@dataclass
class CompositeMapOutcome:
    """Result of applying one composite random map to a trajectory state.

    maps_applied counts random maps drawn from the stream; set_updates and
    state_updates count applications of those maps to a tracked set and to
    the trajectory state respectively.
    """

    state: Any
    coalesced: bool
    maps_applied: int
    set_updates: int
    state_updates: int


class GrandCoupling(ABC):
    """Random-map representation of a Markov chain.

    Subclasses implement drawing a map descriptor from the stream and
    applying a drawn descriptor to a single state or to a tracked state
    set.  apply_random_map composes these, so one draw always feeds both
    the set and the optional trajectory state: word consumption cannot
    depend on whether a caller asked for the state update.
    """

    # -- random-map protocol -------------------------------------------

    @abstractmethod
    def draw_map(self, stream) -> Any:
        """Draw a random-map descriptor; consumption is chain-specific."""

    @abstractmethod
    def apply_map(self, desc, state) -> Any:
        """Apply a drawn map to one state."""

    @abstractmethod
    def apply_map_to_set(self, desc, sset) -> Any:
        """Apply a drawn map to a tracked state set (may mutate sset)."""

    # -- state-set protocol --------------------------------------------

    @abstractmethod
    def full_state_set(self) -> Any:
        """Fresh tracked set covering the entire state space."""

    @abstractmethod
    def is_singleton(self, sset) -> bool: ...

    @abstractmethod
    def extract_element(self, sset) -> Any:
        """The unique member of a singleton set (undefined otherwise)."""

    @abstractmethod
    def canonical_state(self) -> Any:
        """Designated starting state for trajectory-carrying engines."""

    def copy_state(self, state) -> Any:
        """Snapshot of a state; identity for immutable state types."""
        return state

    def apply_random_map(self, stream, sset, state=None):
        """Draw one map and apply it to the set and the optional state."""
        desc = self.draw_map(stream)
        sset = self.apply_map_to_set(desc, sset)
        if state is not None:
            state = self.apply_map(desc, state)
        return sset, state

    def image_of_first_random_map(self, stream, state=None):
        """One random map applied to the full state space (and state).

        Chains whose first map has a special structure (an independence
        sampler, say) override this; the default reuses the natural map.
        """
        return self.apply_random_map(stream, self.full_state_set(), state)

    # -- optional surfaces ---------------------------------------------

    def kernel_spec(self):
        """Descriptor for the compiled backend, or None to run pure."""
        return None

    def format_state(self, state) -> str:
        return str(state)

    def describe(self) -> str:
        return type(self).__name__

    # Finite-chain extras, needed by the exact-map engine and the exact
    # stationary-distribution oracle.

    def enumerate_states(self) -> list:
        raise NotImplementedError(f"{type(self).__name__} is not enumerable")

    def state_index(self, state) -> int:
        raise NotImplementedError

    def state_from_index(self, ix: int):
        return self.enumerate_states()[ix]

    def transition_matrix(self):
        """Dense one-step matrix averaged over the random-map law."""
        raise NotImplementedError


class CitpResult(NamedTuple):
    state: Any
    maps_applied: int


def _composed_map_run(coupling, stream, map_cap, state_cap, biased):
    states = coupling.enumerate_states()
    n = len(states)
    if n > state_cap:
        raise CapExceededError(
            f"state space has {n} states, above the cap of {state_cap}"
        )
    # Composed map as an index vector, starting from the identity.
    composed = list(range(n))
    index = coupling.state_index
    apply_map = coupling.apply_map
    maps = 0
    while len(set(composed)) > 1:
        if maps >= map_cap:
            raise NonCoalescenceError(
                f"no coalescence within {map_cap} maps"
            )
        desc = coupling.draw_map(stream)
        fresh = [index(apply_map(desc, s)) for s in states]
        if biased:
            # Wrong on purpose: composing the new map on the left treats
            # it as the latest update instead of the earliest one, which
            # biases the output toward images of late maps.
            composed = [fresh[composed[x]] for x in range(n)]
        else:
            # The new map acts at the earliest time, so it composes on
            # the right: trajectories pass through it first.
            composed = [composed[fresh[x]] for x in range(n)]
        maps += 1
    return CitpResult(states[composed[0]], maps)


def compose_into_the_past(
    coupling,
    stream,
    *,
    map_cap: int = DEFAULT_MAP_CAP,
    state_cap: int = DEFAULT_STATE_CAP,
) -> CitpResult:
    """Compose fresh random maps into the past until the image is a point.

    Keeps the full composed map explicitly, so it needs an enumerable
    state space; the unique image value is an exact stationary draw.
    """
    from . import backend

    spec = coupling.kernel_spec()
    if spec is not None and backend.compiled_active():
        state_ix, maps = backend.kernels().citp(
            stream, spec, map_cap, state_cap
        )
        if maps == -2:
            raise CapExceededError(
                f"state space is above the cap of {state_cap}"
            )
        if maps == -1:
            raise NonCoalescenceError(
                f"no coalescence within {map_cap} maps"
            )
        return CitpResult(coupling.state_from_index(state_ix), maps)
    return _composed_map_run(coupling, stream, map_cap, state_cap, False)


def compose_into_the_past_biased(
    coupling,
    stream,
    *,
    map_cap: int = DEFAULT_MAP_CAP,
    state_cap: int = DEFAULT_STATE_CAP,
) -> CitpResult:
    """Deliberately mis-ordered composition, kept as a negative control.

    Composes each new map on the left (as if time ran forward), which does
    not sample the stationary distribution; the verification suite exists
    to catch exactly this class of bug, so the bug is kept available.
    """
    return _composed_map_run(coupling, stream, map_cap, state_cap, True)
