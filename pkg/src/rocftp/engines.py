"""Perfect-sampling engines built on grand couplings.

Three engines produce exact stationary draws:

- citp_cftp composes explicit random maps into the past (reference engine
  for enumerable chains);
- binary_backoff_cftp restarts from doubled depths and re-reads earlier
  randomness through a SeededReplayStream;
- read_once_cftp consumes a single forward stream of composite maps and
  never revisits a word.

A composite map is a block of random maps whose coalescence flag is true
with probability at least 1/2 and is independent of the trajectory state
it carries; three interchangeable procedures build one (interleaved,
memory-efficient, first-map-special).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

from . import backend
from .core import (
    DEFAULT_MAP_CAP,
    DEFAULT_STATE_CAP,
    CompositeMapOutcome,
    compose_into_the_past,
)
from .errors import NonCoalescenceError
from .stream import GUARD, ReadOnceStream, SeededReplayStream

COMPOSITE_VARIANTS = ("interleaved", "memory", "first-special")
DEFAULT_T_CAP = 2**30

_VARIANT_IDS = {name: i for i, name in enumerate(COMPOSITE_VARIANTS)}

CompositeProcedure = Callable[..., CompositeMapOutcome]


@dataclass
class EngineReport:
    """Instrumented output of an engine run.

    stream_positions holds the word count before the run and after each
    emitted sample (after initialization, for the read-once engine), so
    consecutive differences give words per sample.
    """

    engine: str
    chain: str
    variant: str | None
    seed: int | None
    samples: list = field(default_factory=list)
    per_sample_maps: list = field(default_factory=list)
    per_sample_set_updates: list = field(default_factory=list)
    per_sample_state_updates: list = field(default_factory=list)
    per_sample_composites: list = field(default_factory=list)
    stream_positions: list = field(default_factory=list)
    init_maps: int = 0
    init_set_updates: int = 0
    init_state_updates: int = 0
    init_composites: int = 0
    words_drawn: int = 0
    reseed_events: int = 0
    replay_events: int = 0

    @property
    def total_maps(self) -> int:
        return self.init_maps + sum(self.per_sample_maps)

    @property
    def total_updates(self) -> int:
        return (
            self.init_set_updates
            + self.init_state_updates
            + sum(self.per_sample_set_updates)
            + sum(self.per_sample_state_updates)
        )


# ---------------------------------------------------------------------
# Composite-map procedures.
#
# The generic implementations below are the reference semantics; the
# compiled kernels reproduce them exactly (same draws, same counters) for
# chains that provide a kernel spec.
# ---------------------------------------------------------------------


def _generic_interleaved(coupling, stream, state, map_cap):
    # Two tracked sets: the first shares each of its maps with the
    # trajectory state, the second consumes independent maps and decides
    # when to stop.  The flag therefore certifies coalescence of a block
    # whose length is independent of the block's own maps.
    set1 = coupling.full_state_set()
    set2 = coupling.full_state_set()
    iters = 0
    while not coupling.is_singleton(set2):
        if 2 * iters >= map_cap:
            raise NonCoalescenceError(
                f"composite map exceeded {map_cap} maps without stopping"
            )
        set1, state = coupling.apply_random_map(stream, set1, state)
        set2, _ = coupling.apply_random_map(stream, set2)
        iters += 1
    return CompositeMapOutcome(
        state=state,
        coalesced=coupling.is_singleton(set1),
        maps_applied=2 * iters,
        set_updates=2 * iters,
        state_updates=iters,
    )


def _generic_memory(coupling, stream, state, map_cap):
    # Rehearse from the full space to learn a block length, then apply
    # that many fresh maps to the trajectory while re-checking
    # coalescence; only one tracked set is alive at a time.
    sset = coupling.full_state_set()
    count = 0
    while not coupling.is_singleton(sset):
        if count >= map_cap:
            raise NonCoalescenceError(
                f"composite map exceeded {map_cap} maps without stopping"
            )
        sset, _ = coupling.apply_random_map(stream, sset)
        count += 1
    sset = coupling.full_state_set()
    for _ in range(count):
        sset, state = coupling.apply_random_map(stream, sset, state)
    return CompositeMapOutcome(
        state=state,
        coalesced=coupling.is_singleton(sset),
        maps_applied=2 * count,
        set_updates=2 * count,
        state_updates=count,
    )


def _generic_first_special(coupling, stream, state, map_cap):
    # Like the memory-efficient procedure, but both phases start from the
    # image of a distinguished first map, which pays off when that image
    # is already small.
    sset, _ = coupling.image_of_first_random_map(stream)
    count = 0
    while not coupling.is_singleton(sset):
        if count >= map_cap:
            raise NonCoalescenceError(
                f"composite map exceeded {map_cap} maps without stopping"
            )
        sset, _ = coupling.apply_random_map(stream, sset)
        count += 1
    sset, state = coupling.image_of_first_random_map(stream, state)
    for _ in range(count):
        sset, state = coupling.apply_random_map(stream, sset, state)
    return CompositeMapOutcome(
        state=state,
        coalesced=coupling.is_singleton(sset),
        maps_applied=2 + 2 * count,
        set_updates=2 + 2 * count,
        state_updates=1 + count,
    )


_GENERIC_COMPOSITES = (
    _generic_interleaved,
    _generic_memory,
    _generic_first_special,
)


def _run_composite(coupling, stream, state, variant_id, map_cap):
    spec = coupling.kernel_spec()
    if spec is not None and backend.compiled_active():
        state_ix, coalesced, maps, set_up, state_up = backend.kernels().composite(
            stream, spec, variant_id, coupling.state_index(state), map_cap
        )
        if maps < 0:
            raise NonCoalescenceError(
                f"composite map exceeded {map_cap} maps without stopping"
            )
        return CompositeMapOutcome(
            state=coupling.state_from_index(state_ix),
            coalesced=bool(coalesced),
            maps_applied=maps,
            set_updates=set_up,
            state_updates=state_up,
        )
    return _GENERIC_COMPOSITES[variant_id](coupling, stream, state, map_cap)


def apply_composite_map_interleaved(
    coupling, stream, state, *, map_cap: int = DEFAULT_MAP_CAP
) -> CompositeMapOutcome:
    """Composite map via two interleaved tracked sets (one pass)."""
    return _run_composite(coupling, stream, state, 0, map_cap)


def apply_composite_map_memory(
    coupling, stream, state, *, map_cap: int = DEFAULT_MAP_CAP
) -> CompositeMapOutcome:
    """Composite map via rehearsal then replay with fresh maps."""
    return _run_composite(coupling, stream, state, 1, map_cap)


def apply_composite_map_first_special(
    coupling, stream, state, *, map_cap: int = DEFAULT_MAP_CAP
) -> CompositeMapOutcome:
    """Composite map whose phases both start from the first map's image."""
    return _run_composite(coupling, stream, state, 2, map_cap)


def resolve_composite(coupling, variant) -> tuple[CompositeProcedure, str]:
    """Map a variant name (or callable) to a composite procedure."""
    if callable(variant):
        return variant, getattr(variant, "__name__", "custom")
    if variant == "native":
        return (
            lambda c, s, st, map_cap: c.apply_composite_map(s, st),
            "native",
        )
    if variant in _VARIANT_IDS:
        vid = _VARIANT_IDS[variant]

        def proc(c, s, st, map_cap=DEFAULT_MAP_CAP):
            return _run_composite(c, s, st, vid, map_cap)

        return proc, variant
    raise ValueError(
        f"unknown composite variant {variant!r}; expected one of "
        f"{COMPOSITE_VARIANTS + ('native',)} or a callable"
    )


# ---------------------------------------------------------------------
# Read-once engine.
# ---------------------------------------------------------------------


class ReadOnceSampler:
    """Incremental read-once sampler over composite maps.

    Applies composite maps to a single forward trajectory; whenever a
    composite reports coalescence, the state saved just before it is an
    exact stationary draw.  The stream is consumed strictly forward; the
    guard forbids any reseeding while an engine call is active.
    """

    def __init__(
        self,
        coupling,
        stream: ReadOnceStream,
        variant="interleaved",
        *,
        map_cap: int = DEFAULT_MAP_CAP,
    ):
        self.coupling = coupling
        self.stream = stream
        self.map_cap = map_cap
        self._composite, self.variant_name = resolve_composite(coupling, variant)
        self._state: Any = None
        self.init_stats: dict | None = None

    def _advance_to_coalescence(self) -> tuple[Any, dict]:
        # The state saved just before the coalescent composite is the
        # exact draw; states before non-coalescent composites are
        # overwritten, matching the one-stream discipline.
        stats = {"maps": 0, "set_updates": 0, "state_updates": 0, "composites": 0}
        while True:
            pos_before = self.stream.position
            old_state = self.coupling.copy_state(self._state)
            out = self._composite(
                self.coupling, self.stream, self._state, map_cap=self.map_cap
            )
            if self.stream.position < pos_before:
                raise AssertionError("stream position moved backwards")
            self._state = out.state
            stats["maps"] += out.maps_applied
            stats["set_updates"] += out.set_updates
            stats["state_updates"] += out.state_updates
            stats["composites"] += 1
            if out.coalesced:
                return old_state, stats

    def initialize(self) -> None:
        """Run composites until the first coalescent one; no sample yet."""
        if self.init_stats is not None:
            raise RuntimeError("sampler already initialized")
        with GUARD.read_once_run():
            self._state = self.coupling.canonical_state()
            _, self.init_stats = self._advance_to_coalescence()

    def next_sample(self) -> tuple[Any, dict]:
        """Advance to the next coalescent composite; the state saved just
        before it is the sample."""
        if self.init_stats is None:
            self.initialize()
        with GUARD.read_once_run():
            return self._advance_to_coalescence()


def read_once_cftp(
    coupling,
    stream: ReadOnceStream,
    k: int,
    variant="interleaved",
    *,
    map_cap: int = DEFAULT_MAP_CAP,
) -> EngineReport:
    """Draw k exact samples from one forward pass over the stream."""
    if k < 0:
        raise ValueError("sample count must be >= 0")
    sampler = ReadOnceSampler(coupling, stream, variant, map_cap=map_cap)
    report = EngineReport(
        engine="read-once",
        chain=coupling.describe(),
        variant=sampler.variant_name,
        seed=getattr(stream, "seed", None),
    )
    report.stream_positions.append(stream.position)
    sampler.initialize()
    init = sampler.init_stats
    report.init_maps = init["maps"]
    report.init_set_updates = init["set_updates"]
    report.init_state_updates = init["state_updates"]
    report.init_composites = init["composites"]
    report.stream_positions.append(stream.position)
    for _ in range(k):
        sample, stats = sampler.next_sample()
        report.samples.append(sample)
        report.per_sample_maps.append(stats["maps"])
        report.per_sample_set_updates.append(stats["set_updates"])
        report.per_sample_state_updates.append(stats["state_updates"])
        report.per_sample_composites.append(stats["composites"])
        report.stream_positions.append(stream.position)
    report.words_drawn = stream.position
    return report


# ---------------------------------------------------------------------
# Binary-backoff engine.
# ---------------------------------------------------------------------


def _bb_sample_generic(coupling, stream, sample_index, t_cap):
    maps = 0
    t_depth = 1
    while True:
        sset = coupling.full_state_set()
        t = t_depth
        while t >= 1:
            if t & (t - 1) == 0:
                stream.set_seed(sample_index, t.bit_length() - 1)
            sset, _ = coupling.apply_random_map(stream, sset)
            maps += 1
            t -= 1
        if coupling.is_singleton(sset):
            return coupling.extract_element(sset), maps, t_depth
        t_depth *= 2
        if t_depth > t_cap:
            raise NonCoalescenceError(
                f"binary backoff exceeded depth cap {t_cap}"
            )


def binary_backoff_cftp(
    coupling,
    master_seed: int,
    k: int,
    *,
    t_cap: int = DEFAULT_T_CAP,
) -> EngineReport:
    """Draw k exact samples by doubling the look-back depth per sample.

    Maps at depth t must be identical across passes, so the engine re-reads
    randomness: each power-of-two depth boundary reseeds the replay stream
    from a (sample index, level) seed table.
    """
    if k < 0:
        raise ValueError("sample count must be >= 0")
    stream = SeededReplayStream(master_seed)
    report = EngineReport(
        engine="binary-backoff",
        chain=coupling.describe(),
        variant=None,
        seed=master_seed,
    )
    report.stream_positions.append(stream.words_drawn)
    spec = coupling.kernel_spec()
    use_kernels = spec is not None and backend.compiled_active()
    for i in range(k):
        if use_kernels:
            state_ix, maps, t_depth = backend.kernels().bb_sample(
                stream, spec, i, t_cap
            )
            if maps < 0:
                raise NonCoalescenceError(
                    f"binary backoff exceeded depth cap {t_cap}"
                )
            sample = coupling.state_from_index(state_ix)
        else:
            sample, maps, t_depth = _bb_sample_generic(coupling, stream, i, t_cap)
        report.samples.append(sample)
        report.per_sample_maps.append(maps)
        report.per_sample_set_updates.append(maps)
        report.per_sample_state_updates.append(0)
        report.per_sample_composites.append(t_depth)
        report.stream_positions.append(stream.words_drawn)
    report.words_drawn = stream.words_drawn
    report.reseed_events = stream.reseed_events
    report.replay_events = stream.replay_events
    return report


# ---------------------------------------------------------------------
# Compose-into-the-past engine wrapper.
# ---------------------------------------------------------------------


def citp_cftp(
    coupling,
    stream: ReadOnceStream,
    k: int,
    *,
    map_cap: int = DEFAULT_MAP_CAP,
    state_cap: int = DEFAULT_STATE_CAP,
) -> EngineReport:
    """Draw k exact samples with the explicit composed-map engine."""
    if k < 0:
        raise ValueError("sample count must be >= 0")
    report = EngineReport(
        engine="citp",
        chain=coupling.describe(),
        variant=None,
        seed=getattr(stream, "seed", None),
    )
    report.stream_positions.append(stream.position)
    with GUARD.read_once_run():
        for _ in range(k):
            state, maps = compose_into_the_past(
                coupling, stream, map_cap=map_cap, state_cap=state_cap
            )
            report.samples.append(state)
            report.per_sample_maps.append(maps)
            report.per_sample_set_updates.append(0)
            report.per_sample_state_updates.append(0)
            report.per_sample_composites.append(1)
            report.stream_positions.append(stream.position)
    report.words_drawn = stream.position
    return report
