"""Read-once exact sampling for locally stable pairwise-interaction
point processes (Strauss and impenetrable spheres).

The composite map mixes one independence-sampler update with a run of
the natural spatial birth-death chain, tracked through a superset
representation (k unknown points, maybe-present set Delta, surely-
present set L).  Round one rehearses the run to find its coalescence
time T; round two replays the construction on the input state for
duration exactly T, which makes the map's duration independent of the
process it drives and the coalescence flag true with probability 1/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

from . import backend
from .core import CompositeMapOutcome
from .errors import CapExceededError
from .points import GridIndex, PointConfiguration, Rectangle, count_close_pairs

DEFAULT_EVENT_CAP = 10**7
TIER_DELTA = 0
TIER_ELL = 1


@dataclass(frozen=True)
class StraussModel:
    """Pairwise-interaction density relative to a Poisson(lambda) process.

    f(sigma) = gamma ** (number of point pairs closer than r).  Adding a
    point multiplies the density by at most K; for gamma <= 1 the
    density is non-increasing in points so K = 1, but the machinery
    carries K so other locally stable densities can reuse it.  A zero
    gamma is softened to epsilon_soft during sampling and the exact law
    is recovered afterward by rejection.
    """

    lambda_: float
    gamma: float
    r: float
    region: Rectangle
    epsilon_soft: float = 1e-20
    proposal_intensity: Optional[float] = None
    lambda_fn: Optional[object] = None

    def __post_init__(self):
        if self.lambda_ <= 0:
            raise ValueError("intensity lambda_ must be positive")
        if not (0.0 <= self.gamma <= 1.0):
            raise ValueError("gamma must lie in [0, 1]")
        if self.r <= 0:
            raise ValueError("interaction radius must be positive")
        if self.epsilon_soft < 0:
            raise ValueError("epsilon_soft must be >= 0")
        if self.lambda_fn is not None:
            raise NotImplementedError(
                "variable intensity over the region is reserved but not implemented"
            )
        if (
            self.proposal_intensity is not None
            and self.proposal_intensity <= self.stability_constant * self.lambda_
        ):
            raise ValueError(
                "proposal intensity must exceed K*lambda for certain acceptance "
                "to be reachable"
            )

    @property
    def stability_constant(self) -> float:
        # gamma <= 1 means a new point can only shrink the density.
        return 1.0

    @property
    def proposal_intensity_effective(self) -> float:
        if self.proposal_intensity is not None:
            return self.proposal_intensity
        return 2.0 * self.stability_constant * self.lambda_

    @property
    def gamma_effective(self) -> float:
        if self.gamma > 0.0:
            return self.gamma
        if self.epsilon_soft == 0.0:
            return 0.0
        return self.epsilon_soft

    def log_density(self, config: PointConfiguration) -> float:
        """Natural log of the softened density."""
        pairs = count_close_pairs(config, self.r)
        if pairs == 0:
            return 0.0
        g = self.gamma_effective
        if g == 0.0:
            raise ValueError(
                "configuration has zero density and no softening is in effect"
            )
        return pairs * math.log(g)

    def interaction_count(self, x: float, y: float, grid: GridIndex) -> int:
        return grid.count_near((x, y))


@dataclass(frozen=True)
class DominatedSetRepr:
    """Superset of possible configurations: k points anywhere, each
    point of delta possibly present, each point of ell surely present."""

    k: int
    delta: tuple
    ell: tuple

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("unknown-point count k must be >= 0")

    @property
    def is_singleton(self) -> bool:
        return self.k == 0 and not self.delta

    def member(self, config: PointConfiguration) -> bool:
        points = set(config.points)
        if not set(self.ell) <= points:
            return False
        extras = points - set(self.ell)
        free = [p for p in extras if p not in set(self.delta)]
        return len(free) <= self.k


class MhUpdate(NamedTuple):
    repr: DominatedSetRepr
    tau_old: Optional[PointConfiguration]
    proposal: PointConfiguration
    accepted: Optional[bool]


@dataclass
class EvolveResult:
    repr: DominatedSetRepr
    state: Optional[PointConfiguration]
    elapsed: float
    coalesced: bool
    events: int
    t1: Optional[float]


def stability_bound(model: StraussModel, sigma: PointConfiguration) -> float:
    """Points needed for certain acceptance of proposal sigma.

    At the default proposal intensity 2*K*lambda this is
    B(sigma) = #sigma + #sigma*log2(K) + log2(1/f(sigma)); any input
    with at least B(sigma) points makes the Hastings ratio >= 1.  A
    custom proposal intensity nu > K*lambda rescales the bound by
    log(nu / lambda) / log(nu / (K*lambda)).
    """
    n = len(sigma)
    pairs = count_close_pairs(sigma, model.r)
    g = model.gamma_effective
    if pairs > 0 and g == 0.0:
        raise ValueError(
            "sigma has zero density; softening is required for a finite bound"
        )
    log2_inv_f = 0.0 if pairs == 0 else pairs * -math.log2(g)
    K = model.stability_constant
    if model.proposal_intensity is None:
        return n + n * math.log2(K) + log2_inv_f
    ratio = model.proposal_intensity / model.lambda_
    denom = math.log2(ratio / K)
    return (n * math.log2(ratio) + log2_inv_f) / denom


def mh_first_update(
    model: StraussModel, stream, state: Optional[PointConfiguration] = None
) -> MhUpdate:
    """Independence-sampler update proposing a Poisson(2*K*lambda) draw.

    Always consumes the proposal words plus one acceptance word, so the
    randomness read does not depend on whether an input state rides
    along.  Returns the superset (ceil(B(sigma)), {}, {}) that bounds
    every possible outcome, and the updated input when one was given.
    """
    nu = model.proposal_intensity_effective
    proposal = stream.poisson_point_process(nu, model.region)
    u = stream.uniform01()
    bound = stability_bound(model, proposal)
    rep = DominatedSetRepr(k=math.ceil(bound), delta=(), ell=())
    if state is None:
        return MhUpdate(repr=rep, tau_old=None, proposal=proposal, accepted=None)
    log_ratio = (
        model.log_density(proposal)
        - model.log_density(state)
        + (len(state) - len(proposal)) * math.log(nu / model.lambda_)
    )
    accepted = log_ratio >= 0.0 or u < math.exp(log_ratio)
    tau_old = proposal if accepted else state
    return MhUpdate(repr=rep, tau_old=tau_old, proposal=proposal, accepted=accepted)


class _PhysicalPoint:
    """Mutable record for a located point of the bound process."""

    __slots__ = ("x", "y", "tier", "in_tau")

    def __init__(self, x, y, tier, in_tau=False):
        self.x = x
        self.y = y
        self.tier = tier
        self.in_tau = in_tau


class _Pools:
    """Bound-side point pools with spatial indexes for pair counting."""

    def __init__(self, model: StraussModel, rep: DominatedSetRepr):
        self.model = model
        self.physical: list[_PhysicalPoint] = []
        self.delta_grid = GridIndex(model.r)
        self.ell_grid = GridIndex(model.r)
        self.n_delta = 0
        self.n_ell = 0
        for x, y in rep.delta:
            self.insert(x, y, TIER_DELTA)
        for x, y in rep.ell:
            self.insert(x, y, TIER_ELL)

    def insert(self, x, y, tier, in_tau=False) -> _PhysicalPoint:
        rec = _PhysicalPoint(x, y, tier, in_tau)
        self.physical.append(rec)
        if tier == TIER_DELTA:
            self.delta_grid.add((x, y))
            self.n_delta += 1
        else:
            self.ell_grid.add((x, y))
            self.n_ell += 1
        return rec

    def remove_at(self, ix: int) -> _PhysicalPoint:
        rec = self.physical[ix]
        self.physical[ix] = self.physical[-1]
        self.physical.pop()
        if rec.tier == TIER_DELTA:
            self.delta_grid.remove((rec.x, rec.y))
            self.n_delta -= 1
        else:
            self.ell_grid.remove((rec.x, rec.y))
            self.n_ell -= 1
        return rec

    def snapshot(self, k: int) -> DominatedSetRepr:
        delta = tuple(
            sorted((p.x, p.y) for p in self.physical if p.tier == TIER_DELTA)
        )
        ell = tuple(sorted((p.x, p.y) for p in self.physical if p.tier == TIER_ELL))
        return DominatedSetRepr(k=k, delta=delta, ell=ell)


def _birth_tier(model, pools, x, y, u_acc, unknowns_alive):
    """Bound-side placement of an accepted-or-maybe birth proposal.

    While unknown points remain, no birth can be surely present (an
    unknown point might sit arbitrarily close), so candidates go to
    delta when they would be accepted by SOME possible state.  Once the
    unknowns are gone the state is sandwiched between ell and
    ell+delta, and a shared uniform settles sure, maybe, or rejected.
    """
    K = model.stability_constant
    g = model.gamma_effective
    t_ell = pools.ell_grid.count_near((x, y))
    p_hi = (g**t_ell) / K
    if unknowns_alive:
        return TIER_DELTA if u_acc < p_hi else None
    t_both = t_ell + pools.delta_grid.count_near((x, y))
    p_lo = (g**t_both) / K
    if u_acc < p_lo:
        return TIER_ELL
    if u_acc < p_hi:
        return TIER_DELTA
    return None


def _evolve_compiled(model, stream, rep, duration, state, event_cap):
    """Dispatch the event loop to the compiled kernel.

    Setup and result assembly stay here; the kernel consumes stream
    words exactly as the pure loop does, so both backends agree bit for
    bit (asserted by the test suite).
    """
    region = model.region
    K = model.stability_constant
    g = model.gamma_effective
    lam_births = K * model.lambda_ * region.area
    init_pts = [(x, y, TIER_DELTA) for x, y in rep.delta]
    init_pts += [(x, y, TIER_ELL) for x, y in rep.ell]
    tau_pts = list(state.points) if state is not None else None
    rc, t, t1, events, k_final, physical, tau_rem = backend.kernels().strauss_evolve(
        stream,
        lam_births,
        g,
        K,
        region.width,
        region.height,
        model.r,
        rep.k,
        init_pts,
        -1.0 if duration is None else duration,
        tau_pts,
        event_cap,
    )
    if rc == 1:
        if duration is None:
            raise CapExceededError(f"no coalescence within {event_cap} events")
        raise CapExceededError(f"event cap {event_cap} hit before the duration")
    if rc == 2:
        raise AssertionError("state accepted a birth outside the bound")
    delta = tuple(sorted((x, y) for x, y, tier, _ in physical if tier == TIER_DELTA))
    ell = tuple(sorted((x, y) for x, y, tier, _ in physical if tier == TIER_ELL))
    final_state = None
    if state is not None:
        points = list(tau_rem)
        points.extend((x, y) for x, y, _, in_tau in physical if in_tau)
        final_state = PointConfiguration(points, region)
    coalesced = k_final == 0 and not delta
    return EvolveResult(
        repr=DominatedSetRepr(k=k_final, delta=delta, ell=ell),
        state=final_state,
        elapsed=t,
        coalesced=coalesced,
        events=events,
        t1=None if t1 < 0.0 else t1,
    )


def birth_death_evolve(
    model: StraussModel,
    stream,
    rep: DominatedSetRepr,
    *,
    duration: Optional[float] = None,
    state: Optional[PointConfiguration] = None,
    event_cap: int = DEFAULT_EVENT_CAP,
    check_invariants: bool = False,
) -> EvolveResult:
    """Run the coupled spatial birth-death process on a superset.

    Births are proposed at rate K*lambda*area and located points die at
    rate 1.  With duration None the run continues until the superset is
    a single configuration and reports the elapsed time; the k unknown
    points then produce no events of their own, only the time at which
    the last of them dies (the max of k unit exponentials, drawn in one
    word).  With a fixed duration each unknown point is a real death
    unit generating death events, and an optional input state is carried
    through the same event stream: its points occupy the first slots of
    the unknown pool, and every event is reinterpreted against it, so
    the randomness consumed never depends on the input.
    """
    region = model.region
    K = model.stability_constant
    g = model.gamma_effective
    lam_births = K * model.lambda_ * region.area
    until_coalescent = duration is None
    if until_coalescent and state is not None:
        raise ValueError("state tracking needs a fixed duration")
    track = state is not None
    if track:
        if rep.delta or rep.ell:
            raise ValueError(
                "state tracking starts from an all-unknown superset (k, {}, {})"
            )
        if len(state) > rep.k:
            raise ValueError(
                f"input state has {len(state)} points but only {rep.k} unknown slots"
            )
        if state.region != region:
            raise ValueError("input state region does not match the model region")

    if backend.compiled_active() and not check_invariants:
        return _evolve_compiled(
            model, stream, rep, duration, state, event_cap
        )

    pools = _Pools(model, rep)
    k = rep.k
    events = 0
    t = 0.0
    t1: Optional[float] = 0.0 if k == 0 else None

    tau_old: list[tuple] = []
    tau_grid = GridIndex(model.r)
    if track:
        tau_old = list(state.points)
        for x, y in tau_old:
            tau_grid.add((x, y))

    def tau_accepts(x, y, u_acc):
        return u_acc < (g ** tau_grid.count_near((x, y))) / K

    def assert_invariants():
        if not track:
            return
        for p in pools.physical:
            if p.tier == TIER_ELL and not p.in_tau:
                raise AssertionError("surely-present point missing from the state")
            if p.in_tau and len(tau_old) > k:
                raise AssertionError("state outgrew the unknown pool")

    if until_coalescent:
        # Unknown points generate no events; only the time the last one
        # dies matters, and that is the max of k unit exponentials.
        if k > 0:
            u = stream.uniform01()
            t1 = -math.log1p(-(u ** (1.0 / k)))
        unknowns_alive = k > 0 and t1 > 0.0
        if not unknowns_alive and pools.n_delta == 0:
            return EvolveResult(
                repr=pools.snapshot(0), state=None, elapsed=0.0,
                coalesced=True, events=0, t1=t1,
            )
        while True:
            if events >= event_cap:
                raise CapExceededError(f"no coalescence within {event_cap} events")
            rate = lam_births + len(pools.physical)
            dt = stream.exponential(rate)
            t_next = t + dt
            if unknowns_alive and t_next >= t1:
                unknowns_alive = False
                if pools.n_delta == 0:
                    t = t1
                    break
            t = t_next
            events += 1
            u_type = stream.uniform01()
            if u_type < lam_births / rate:
                x = stream.uniform01() * region.width
                y = stream.uniform01() * region.height
                u_acc = stream.uniform01()
                tier = _birth_tier(model, pools, x, y, u_acc, unknowns_alive)
                if tier is not None:
                    pools.insert(x, y, tier)
            else:
                pools.remove_at(stream.uniform_int(len(pools.physical)))
                if not unknowns_alive and pools.n_delta == 0:
                    break
        return EvolveResult(
            repr=pools.snapshot(0), state=None, elapsed=t,
            coalesced=True, events=events, t1=t1,
        )

    # Fixed duration: the k unknown points are real death units so the
    # event stream (and hence the coalescence flag) is the same for
    # every input state.
    while True:
        if events >= event_cap:
            raise CapExceededError(f"event cap {event_cap} hit before the duration")
        rate = lam_births + k + len(pools.physical)
        dt = stream.exponential(rate)
        if t + dt > duration:
            t = duration
            break
        t = t + dt
        events += 1
        u_type = stream.uniform01()
        cut_birth = lam_births / rate
        cut_unknown = (lam_births + k) / rate
        if u_type < cut_birth:
            x = stream.uniform01() * region.width
            y = stream.uniform01() * region.height
            u_acc = stream.uniform01()
            tier = _birth_tier(model, pools, x, y, u_acc, k > 0)
            tau_birth = track and tau_accepts(x, y, u_acc)
            if tier is not None:
                pools.insert(x, y, tier, in_tau=tau_birth)
                if tau_birth:
                    tau_grid.add((x, y))
            elif tau_birth:
                # The state is sandwiched between ell and ell+delta, so
                # its acceptance threshold never exceeds the bound's.
                raise AssertionError("state accepted a birth outside the bound")
        elif u_type < cut_unknown:
            victim = stream.uniform_int(k)
            if track and victim < len(tau_old):
                x, y = tau_old.pop(victim)
                tau_grid.remove((x, y))
            k -= 1
            if k == 0:
                t1 = t
        else:
            rec = pools.remove_at(stream.uniform_int(len(pools.physical)))
            if rec.in_tau:
                tau_grid.remove((rec.x, rec.y))
        if check_invariants:
            assert_invariants()

    coalesced = k == 0 and pools.n_delta == 0
    final_state = None
    if track:
        points = list(tau_old)
        points.extend((p.x, p.y) for p in pools.physical if p.in_tau)
        final_state = PointConfiguration(points, region)
    return EvolveResult(
        repr=pools.snapshot(k), state=final_state, elapsed=t,
        coalesced=coalesced, events=events, t1=t1,
    )


class StraussCoupling:
    """Composite-map coupling for the read-once engine.

    One composite map runs the update rehearsal (round one) to learn
    the coalescence time T, throws the rehearsed state away, then
    replays a fresh update on the input for duration exactly T.  T is
    independent of the round-two process, so the map preserves the
    target law, and the flag (round-two coalescence by time T) is true
    with probability exactly 1/2: it compares two independent copies of
    the same coalescence time.
    """

    def __init__(self, model: StraussModel, *, event_cap: int = DEFAULT_EVENT_CAP):
        self.model = model
        self.event_cap = event_cap

    def describe(self) -> str:
        m = self.model
        return (
            f"strauss(lambda={m.lambda_:g}, gamma={m.gamma:g}, r={m.r:g}, "
            f"region={m.region.width:g}x{m.region.height:g})"
        )

    def canonical_state(self) -> PointConfiguration:
        return PointConfiguration((), self.model.region)

    def copy_state(self, state):
        return state

    def apply_composite_map(self, stream, state) -> CompositeMapOutcome:
        model = self.model
        first = mh_first_update(model, stream, None)
        rehearsal = birth_death_evolve(
            model, stream, first.repr, duration=None, event_cap=self.event_cap
        )
        second = mh_first_update(model, stream, state)
        run = birth_death_evolve(
            model,
            stream,
            second.repr,
            duration=rehearsal.elapsed,
            state=second.tau_old,
            event_cap=self.event_cap,
        )
        events = rehearsal.events + run.events
        return CompositeMapOutcome(
            state=run.state,
            coalesced=run.coalesced,
            maps_applied=2 + events,
            set_updates=events,
            state_updates=run.events,
        )


@dataclass
class StraussSampleReport:
    samples: list
    composites: int
    rejected: int

    @property
    def acceptance_rate(self) -> float:
        total = len(self.samples) + self.rejected
        return 1.0 if total == 0 else len(self.samples) / total


def sample_strauss_report(
    model: StraussModel,
    stream,
    k_samples: int,
    *,
    event_cap: int = DEFAULT_EVENT_CAP,
    rejection_cap: int = 1000,
) -> StraussSampleReport:
    """Exact samples plus bookkeeping on the gamma = 0 rejection step.

    Sampling runs against the softened density; when gamma is exactly
    zero a draw containing any close pair is rejected and the read-once
    pass simply continues to the next draw.  Softening at 1e-20 makes
    rejections vanishingly rare.
    """
    from .engines import ReadOnceSampler

    coupling = StraussCoupling(model, event_cap=event_cap)
    sampler = ReadOnceSampler(coupling, stream, variant="native")
    report = StraussSampleReport(samples=[], composites=0, rejected=0)
    while len(report.samples) < k_samples:
        sample, stats = sampler.next_sample()
        report.composites += stats["composites"]
        if model.gamma == 0.0 and count_close_pairs(sample, model.r) > 0:
            report.rejected += 1
            if report.rejected > rejection_cap:
                raise CapExceededError(
                    f"more than {rejection_cap} rejections against the exact "
                    "density; softening factor looks too coarse"
                )
            continue
        report.samples.append(sample)
    return report


def sample_strauss(
    model: StraussModel,
    stream,
    k_samples: int,
    *,
    event_cap: int = DEFAULT_EVENT_CAP,
) -> list:
    """Exact draws from the model's stationary law (read-once pass)."""
    return sample_strauss_report(
        model, stream, k_samples, event_cap=event_cap
    ).samples
