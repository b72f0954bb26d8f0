"""Randomness streams with a mechanically enforced read-once discipline.

Two stream types exist.  ReadOnceStream hands out each 64-bit word exactly
once: position only moves forward and there is no reseed/rewind/fork API at
all.  SeededReplayStream exists solely for the binary-backoff engine, which
must re-read earlier randomness; it is the only sanctioned way to replay,
and creating or reseeding one while a read-once run is active is a hard
error (tracked by the module-level GUARD).
"""

from __future__ import annotations

import math
from contextlib import contextmanager

from .errors import ReadOnceViolationError
from .points import PointConfiguration, Rectangle

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
# Threshold between sequential-search and transformed-rejection Poisson
# sampling; both consume a deterministic word count given the outcome.
_POISSON_INVERSION_CUTOFF = 30.0


def mix64(z: int) -> int:
    """Finalizer of the splitmix64 generator; a 64-bit bijective mixer."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _expand_seed(seed: int) -> tuple[int, int, int, int]:
    """Expand a 64-bit seed into 256 bits of generator state via splitmix64."""
    s = seed & _MASK64
    out = []
    for _ in range(4):
        s = (s + _GOLDEN) & _MASK64
        out.append(mix64(s))
    return tuple(out)


def derive_seed(master: int, *indices: int) -> int:
    """Derive a child seed from a master seed and a tuple of indices."""
    h = mix64(master)
    for ix in indices:
        h = mix64(h ^ mix64((ix + 1) & _MASK64))
    return h


class StreamGuard:
    """Process-wide tally of randomness-discipline events.

    Engines wrap read-once runs in read_once_run(); while any such run is
    active, constructing or reseeding a SeededReplayStream raises.  The
    counters let tests assert, after the fact, that read-once runs saw zero
    reseeds and that binary-backoff runs really did replay seeds.
    """

    def __init__(self):
        self.read_once_depth = 0
        self.reset()

    def reset(self) -> None:
        self.replay_streams_created = 0
        self.reseed_events = 0
        self.replay_events = 0
        self.reseeds_during_read_once = 0

    @contextmanager
    def read_once_run(self):
        self.read_once_depth += 1
        try:
            yield self
        finally:
            self.read_once_depth -= 1

    def note_replay_stream_created(self) -> None:
        if self.read_once_depth > 0:
            raise ReadOnceViolationError(
                "a seeded replay stream may not be created inside a "
                "read-once run"
            )
        self.replay_streams_created += 1

    def note_reseed(self, replayed: bool) -> None:
        if self.read_once_depth > 0:
            self.reseeds_during_read_once += 1
            raise ReadOnceViolationError(
                "reseeding is forbidden while a read-once run is active"
            )
        self.reseed_events += 1
        if replayed:
            self.replay_events += 1

    def snapshot(self) -> dict:
        return {
            "replay_streams_created": self.replay_streams_created,
            "reseed_events": self.reseed_events,
            "replay_events": self.replay_events,
            "reseeds_during_read_once": self.reseeds_during_read_once,
        }


GUARD = StreamGuard()


class _XoshiroStream:
    """xoshiro256** core with word accounting.

    The attributes _s0.._s3 and _position are also the synchronization
    surface for the compiled kernels, which load them, run, and store them
    back; both backends therefore consume identical words.
    """

    __slots__ = ("_s0", "_s1", "_s2", "_s3", "_position")

    def __init__(self, seed: int):
        self._reseed_state(seed)
        self._position = 0

    def _reseed_state(self, seed: int) -> None:
        self._s0, self._s1, self._s2, self._s3 = _expand_seed(seed)

    @property
    def position(self) -> int:
        """Number of 64-bit words drawn; strictly increasing, never reset."""
        return self._position

    def next_word(self) -> int:
        """Draw the next 64-bit word.  Each word can be drawn exactly once."""
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        x = (s1 * 5) & _MASK64
        result = ((((x << 7) | (x >> 57)) & _MASK64) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, s3
        self._position += 1
        return result

    def uniform01(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits of one word."""
        return (self.next_word() >> 11) * 1.1102230246251565e-16

    def uniform_int(self, n: int) -> int:
        """Unbiased uniform integer in [0, n) by rejection."""
        if n <= 0:
            raise ValueError(f"uniform_int needs n >= 1, got {n}")
        rem = (1 << 64) % n
        while True:
            w = self.next_word()
            if w >= rem:
                return w % n

    def exponential(self, rate: float) -> float:
        """Exponential variate with the given rate; consumes one word."""
        if not rate > 0.0:
            raise ValueError(f"exponential needs rate > 0, got {rate}")
        return -math.log1p(-self.uniform01()) / rate

    def poisson(self, mean: float) -> int:
        """Poisson variate; mean 0 is answered without consuming words."""
        if mean < 0.0:
            raise ValueError(f"poisson needs mean >= 0, got {mean}")
        if mean == 0.0:
            return 0
        if mean < _POISSON_INVERSION_CUTOFF:
            return self._poisson_inversion(mean)
        return self._poisson_ptrs(mean)

    def _poisson_inversion(self, mean: float) -> int:
        u = self.uniform01()
        p = math.exp(-mean)
        f = p
        k = 0
        while u > f:
            k += 1
            p *= mean / k
            f += p
            if p == 0.0:
                break
        return k

    def _poisson_ptrs(self, mean: float) -> int:
        # Transformed rejection with squeeze; word count is two per
        # attempt and the attempt count is determined by the draws.
        b = 0.931 + 2.53 * math.sqrt(mean)
        a = -0.059 + 0.02483 * b
        inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
        v_r = 0.9277 - 3.6224 / (b - 2.0)
        log_mean = math.log(mean)
        while True:
            u = self.uniform01() - 0.5
            v = self.uniform01()
            us = 0.5 - abs(u)
            k = math.floor((2.0 * a / us + b) * u + mean + 0.43)
            if us >= 0.07 and v <= v_r:
                return int(k)
            if k < 0 or (us < 0.013 and v > us):
                continue
            if (
                math.log(v) + math.log(inv_alpha) - math.log(a / (us * us) + b)
                <= k * log_mean - mean - math.lgamma(k + 1.0)
            ):
                return int(k)

    def poisson_point_process(
        self, intensity: float, region: Rectangle
    ) -> PointConfiguration:
        """Homogeneous Poisson point process on a rectangle."""
        if intensity < 0.0:
            raise ValueError(f"intensity must be >= 0, got {intensity}")
        n = self.poisson(intensity * region.area)
        pts = []
        for _ in range(n):
            x = self.uniform01() * region.width
            y = self.uniform01() * region.height
            pts.append((x, y))
        return PointConfiguration(pts, region)

    # A stream is single-owner and forbids forking; copying or pickling one
    # would duplicate unread words.
    def __copy__(self):
        raise ReadOnceViolationError("streams cannot be copied")

    def __deepcopy__(self, memo):
        raise ReadOnceViolationError("streams cannot be copied")

    def __reduce__(self):
        raise ReadOnceViolationError("streams cannot be pickled")


class ReadOnceStream(_XoshiroStream):
    """Forward-only randomness stream: no reseed, no rewind, no fork."""

    __slots__ = ("_seed",)

    def __init__(self, seed: int):
        super().__init__(seed)
        self._seed = seed & _MASK64

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def words_drawn(self) -> int:
        return self._position

    def __repr__(self):
        return f"ReadOnceStream(seed={self._seed}, position={self._position})"


class SeededReplayStream(_XoshiroStream):
    """Replayable stream for the binary-backoff engine only.

    Seeds are derived from a master seed and indexed by (sample index,
    backoff level); reseeding with an index pair that was already used is a
    deliberate replay of earlier randomness.  The read-once engines must
    never touch this type, which GUARD enforces.
    """

    __slots__ = ("_master_seed", "seed_table", "active_seed", "_words_total",
                 "reseed_events", "replay_events")

    def __init__(self, master_seed: int):
        GUARD.note_replay_stream_created()
        super().__init__(master_seed)
        self._master_seed = master_seed & _MASK64
        self.seed_table: dict[tuple[int, int], int] = {}
        self.active_seed: tuple[int, int] | None = None
        self._words_total = 0
        self.reseed_events = 0
        self.replay_events = 0

    @property
    def master_seed(self) -> int:
        return self._master_seed

    @property
    def words_drawn(self) -> int:
        """Total words drawn across all seeds (replayed words recount)."""
        return self._words_total + self._position

    def set_seed(self, sample_index: int, level: int) -> None:
        """Jump to the seed for (sample_index, level), replaying if seen."""
        key = (sample_index, level)
        replayed = key in self.seed_table
        GUARD.note_reseed(replayed)
        if replayed:
            value = self.seed_table[key]
            self.replay_events += 1
        else:
            value = derive_seed(self._master_seed, sample_index, level)
            self.seed_table[key] = value
        self.reseed_events += 1
        self.active_seed = key
        self._words_total += self._position
        self._position = 0
        self._reseed_state(value)

    def __repr__(self):
        return (
            f"SeededReplayStream(master_seed={self._master_seed}, "
            f"active_seed={self.active_seed}, position={self._position})"
        )
