"""Locally stable point-process sampler: bounds, dynamics, exact laws."""

import math

import numpy as np
import pytest

from rocftp.errors import CapExceededError
from rocftp.points import PointConfiguration, Rectangle, count_close_pairs
from rocftp.stream import ReadOnceStream
from rocftp.strauss import (
    DominatedSetRepr,
    StraussCoupling,
    StraussModel,
    birth_death_evolve,
    mh_first_update,
    sample_strauss,
    sample_strauss_report,
    stability_bound,
)
from rocftp.verify import ks_test, strauss_rejection_oracle, tv_distance

UNIT = Rectangle(1.0, 1.0)


def _model(**kwargs):
    base = dict(lambda_=1.0, gamma=0.5, r=0.3, region=UNIT)
    base.update(kwargs)
    return StraussModel(**base)


def _config(points, region=UNIT):
    return PointConfiguration(points, region)


class TestModelValidation:
    def test_parameter_errors(self):
        with pytest.raises(ValueError):
            _model(lambda_=0.0)
        with pytest.raises(ValueError):
            _model(gamma=1.5)
        with pytest.raises(ValueError):
            _model(gamma=-0.1)
        with pytest.raises(ValueError):
            _model(r=0.0)
        with pytest.raises(ValueError):
            _model(epsilon_soft=-1e-9)
        with pytest.raises(NotImplementedError):
            _model(lambda_fn=lambda x, y: 1.0)

    def test_proposal_intensity_must_exceed_k_lambda(self):
        with pytest.raises(ValueError):
            _model(proposal_intensity=1.0)
        with pytest.raises(ValueError):
            _model(proposal_intensity=0.5)
        assert _model(proposal_intensity=1.5).proposal_intensity_effective == 1.5
        assert _model().proposal_intensity_effective == 2.0

    def test_gamma_effective(self):
        assert _model(gamma=0.5).gamma_effective == 0.5
        assert _model(gamma=0.0).gamma_effective == 1e-20
        assert _model(gamma=0.0, epsilon_soft=1e-6).gamma_effective == 1e-6
        assert _model(gamma=0.0, epsilon_soft=0.0).gamma_effective == 0.0


class TestDensityAndBound:
    def test_log_density(self):
        model = _model()
        assert model.log_density(_config([])) == 0.0
        assert model.log_density(_config([(0.1, 0.1), (0.9, 0.9)])) == 0.0
        two_close = _config([(0.1, 0.1), (0.2, 0.1)])
        assert model.log_density(two_close) == pytest.approx(math.log(0.5))
        hard = _model(gamma=0.0, epsilon_soft=0.0)
        with pytest.raises(ValueError):
            hard.log_density(two_close)

    def test_stability_bound_empty(self):
        assert stability_bound(_model(), _config([])) == 0.0

    def test_stability_bound_default_proposal(self):
        # Three points, one close pair, gamma 1/2: each point costs one
        # bit and the pair costs -log2(1/2) = 1, so B = 4.
        sigma = _config([(0.1, 0.1), (0.2, 0.1), (0.8, 0.8)])
        assert stability_bound(_model(), sigma) == pytest.approx(4.0)

    def test_stability_bound_softened_hard_core(self):
        sigma = _config([(0.1, 0.1), (0.2, 0.1)])
        bound = stability_bound(_model(gamma=0.0), sigma)
        assert bound == pytest.approx(2.0 + 20.0 * math.log2(10.0))

    def test_stability_bound_custom_proposal(self):
        # nu = 4*K*lambda: log2(nu/lambda) = 2 and the denominator is
        # log2(nu/(K*lambda)) = 2, giving (3*2 + 1) / 2.
        sigma = _config([(0.1, 0.1), (0.2, 0.1), (0.8, 0.8)])
        bound = stability_bound(_model(proposal_intensity=4.0), sigma)
        assert bound == pytest.approx(3.5)

    def test_stability_bound_unsoftened_zero_density(self):
        sigma = _config([(0.1, 0.1), (0.2, 0.1)])
        with pytest.raises(ValueError):
            stability_bound(_model(gamma=0.0, epsilon_soft=0.0), sigma)


class TestDominatedSetRepr:
    def test_is_singleton(self):
        assert DominatedSetRepr(0, (), ()).is_singleton
        assert DominatedSetRepr(0, (), ((0.5, 0.5),)).is_singleton
        assert not DominatedSetRepr(1, (), ()).is_singleton
        assert not DominatedSetRepr(0, ((0.5, 0.5),), ()).is_singleton
        with pytest.raises(ValueError):
            DominatedSetRepr(-1, (), ())

    def test_member(self):
        rep = DominatedSetRepr(1, ((0.5, 0.5),), ((0.25, 0.25),))
        assert rep.member(_config([(0.25, 0.25)]))
        assert rep.member(_config([(0.25, 0.25), (0.5, 0.5), (0.9, 0.9)]))
        assert not rep.member(_config([(0.5, 0.5)]))  # ell point missing
        assert not rep.member(_config([(0.25, 0.25), (0.1, 0.1), (0.2, 0.2)]))


class TestFirstUpdate:
    def test_without_state(self):
        model = _model()
        upd = mh_first_update(model, ReadOnceStream(60), None)
        assert upd.tau_old is None and upd.accepted is None
        assert upd.repr.delta == () and upd.repr.ell == ()
        assert upd.repr.k == math.ceil(stability_bound(model, upd.proposal))

    def test_word_consumption_independent_of_state(self):
        model = _model(region=Rectangle(2.0, 2.0))
        big = _config(
            [(0.07 * i, 0.05 * i) for i in range(1, 25)], Rectangle(2.0, 2.0)
        )
        s_none, s_big = ReadOnceStream(61), ReadOnceStream(61)
        a = mh_first_update(model, s_none, None)
        b = mh_first_update(model, s_big, big)
        assert s_none.position == s_big.position
        assert a.proposal.points == b.proposal.points
        assert a.repr == b.repr
        assert b.accepted in (True, False)
        assert b.tau_old is (b.proposal if b.accepted else big)

    def test_update_chain_matches_rejection_oracle(self):
        # The independence-sampler update leaves the target law invariant;
        # compare the point-count law of a long update chain against
        # plain rejection sampling that shares no code with it.
        model = StraussModel(
            lambda_=0.5, gamma=0.5, r=1.0, region=Rectangle(2.0, 2.0)
        )
        stream = ReadOnceStream(62)
        state = _config([], model.region)
        counts: dict[int, int] = {}
        n = 60_000
        for i in range(n):
            state = mh_first_update(model, stream, state).tau_old
            if i >= 1000:
                counts[len(state)] = counts.get(len(state), 0) + 1
        oracle: dict[int, int] = {}
        for c in strauss_rejection_oracle(model, 20_000, seed=63):
            oracle[c] = oracle.get(c, 0) + 1
        assert tv_distance(counts, oracle) < 0.03


class TestEvolve:
    def test_validation_errors(self):
        model = _model()
        stream = ReadOnceStream(0)
        state = _config([(0.5, 0.5)])
        with pytest.raises(ValueError):
            birth_death_evolve(model, stream, DominatedSetRepr(2, (), ()),
                               duration=None, state=state)
        with pytest.raises(ValueError):
            birth_death_evolve(
                model, stream, DominatedSetRepr(2, ((0.1, 0.1),), ()),
                duration=1.0, state=state,
            )
        with pytest.raises(ValueError):
            birth_death_evolve(model, stream, DominatedSetRepr(0, (), ()),
                               duration=1.0, state=state)
        other = _config([(0.5, 0.5)], Rectangle(2.0, 2.0))
        with pytest.raises(ValueError):
            birth_death_evolve(model, stream, DominatedSetRepr(2, (), ()),
                               duration=1.0, state=other)

    def test_event_caps_both_modes(self):
        model = _model(region=Rectangle(2.0, 2.0))
        rep = DominatedSetRepr(10, (), ())
        with pytest.raises(CapExceededError, match="no coalescence within"):
            birth_death_evolve(model, ReadOnceStream(64), rep, event_cap=3)
        with pytest.raises(CapExceededError, match="before the duration"):
            birth_death_evolve(
                model, ReadOnceStream(64), rep, duration=50.0, event_cap=3
            )

    def test_fixed_duration_elapsed_is_exact(self):
        model = _model()
        out = birth_death_evolve(
            model, ReadOnceStream(65), DominatedSetRepr(2, (), ()), duration=6.0
        )
        assert out.elapsed == 6.0

    def test_until_coalescent_reaches_singleton(self):
        model = _model(region=Rectangle(2.0, 2.0))
        stream = ReadOnceStream(66)
        for _ in range(20):
            out = birth_death_evolve(model, stream, DominatedSetRepr(6, (), ()))
            assert out.coalesced and out.repr.is_singleton
            assert out.repr.delta == () and out.repr.k == 0
            assert out.t1 is not None and out.elapsed >= out.t1
            assert out.state is None

    def test_until_coalescent_trivial_start(self):
        out = birth_death_evolve(
            _model(), ReadOnceStream(67), DominatedSetRepr(0, (), ())
        )
        assert out.coalesced and out.events == 0 and out.elapsed == 0.0

    def test_quiet_region_ends_at_last_unknown_death(self):
        # With a negligible birth rate nothing else happens, so the run
        # ends exactly when the last unknown dies.
        model = _model(lambda_=1e-9)
        out = birth_death_evolve(
            model, ReadOnceStream(68), DominatedSetRepr(3, (), ())
        )
        assert out.events == 0
        assert out.elapsed == out.t1

    def test_poisson_equilibrium_at_gamma_one(self):
        # gamma = 1 removes the interaction: the process is an immigration-
        # death system whose time-20 law from empty is Poisson(lambda*area)
        # up to an e^-20 transient.
        model = StraussModel(
            lambda_=1.0, gamma=1.0, r=1.0, region=Rectangle(2.0, 2.0)
        )
        stream = ReadOnceStream(69)
        rep = DominatedSetRepr(0, (), ())
        sizes = []
        for _ in range(10_000):
            out = birth_death_evolve(model, stream, rep, duration=20.0)
            assert out.repr.k == 0 and out.repr.delta == ()
            sizes.append(len(out.repr.ell))
        mean = float(np.mean(sizes))
        assert abs(mean - 4.0) <= 4.0 * math.sqrt(4.0 / len(sizes))

    def test_pure_death_survival(self):
        # Unknown points die at unit rate; after duration 3 each survives
        # with probability e^-3.
        model = _model(lambda_=1e-9)
        rep = DominatedSetRepr(5, (), ())
        stream = ReadOnceStream(70)
        survivors = []
        for _ in range(2000):
            out = birth_death_evolve(model, stream, rep, duration=3.0)
            survivors.append(out.repr.k)
            assert (out.t1 is not None) == (out.repr.k == 0)
        p = math.exp(-3.0)
        mean = float(np.mean(survivors))
        sem = math.sqrt(5 * p * (1 - p) / len(survivors))
        assert abs(mean - 5 * p) <= 4.0 * sem

    def test_last_unknown_death_time_law(self):
        # The time the last of k unknowns dies is the max of k unit
        # exponentials, here exercised through the real event stream.
        model = _model(lambda_=1e-9)
        rep = DominatedSetRepr(8, (), ())
        stream = ReadOnceStream(71)
        t1s = []
        for _ in range(2000):
            out = birth_death_evolve(model, stream, rep, duration=25.0)
            assert out.t1 is not None
            t1s.append(out.t1)
        report = ks_test(t1s, lambda t: (1.0 - math.exp(-t)) ** 8)
        assert report.p_value >= 0.001

    def test_tracked_state_stays_inside_bound(self):
        # check_invariants forces the pure path and asserts the sandwich
        # at every event; the final state must lie in the final superset.
        model = _model(region=Rectangle(2.0, 2.0))
        stream = ReadOnceStream(72)
        state = _config([], model.region)
        for _ in range(40):
            upd = mh_first_update(model, stream, state)
            out = birth_death_evolve(
                model, stream, upd.repr, duration=2.0, state=upd.tau_old,
                check_invariants=True,
            )
            assert out.repr.member(out.state)
            state = out.state
            for (xa, ya), (xb, yb) in zip(state.points, state.points[1:]):
                assert (xa, ya) != (xb, yb)


class TestCoupling:
    def test_composite_outcome_structure(self):
        coupling = StraussCoupling(_model())
        stream = ReadOnceStream(73)
        state = coupling.canonical_state()
        flags = 0
        n = 400
        for _ in range(n):
            out = coupling.apply_composite_map(stream, state)
            assert out.maps_applied == out.set_updates + 2
            assert out.state_updates <= out.set_updates
            assert out.state.region == UNIT
            state = out.state
            flags += 1 if out.coalesced else 0
        freq = flags / n
        assert abs(freq - 0.5) <= 4.0 * math.sqrt(0.25 / n)

    def test_describe_mentions_parameters(self):
        text = StraussCoupling(_model()).describe()
        assert "strauss" in text and "gamma=0.5" in text

    def test_composite_event_cap(self):
        coupling = StraussCoupling(_model(region=Rectangle(2.0, 2.0)),
                                   event_cap=3)
        with pytest.raises(CapExceededError):
            coupling.apply_composite_map(
                ReadOnceStream(74), coupling.canonical_state()
            )


class TestSampling:
    def test_report_bookkeeping(self):
        model = _model()
        report = sample_strauss_report(model, ReadOnceStream(75), 30)
        assert len(report.samples) == 30
        assert report.composites >= 30
        assert report.rejected == 0
        assert report.acceptance_rate == 1.0
        for config in report.samples:
            assert isinstance(config, PointConfiguration)
            assert config.region == UNIT

    def test_hard_core_samples_have_no_close_pairs(self):
        model = _model(gamma=0.0)
        report = sample_strauss_report(model, ReadOnceStream(76), 50)
        assert report.rejected == 0
        for config in report.samples:
            assert count_close_pairs(config, model.r) == 0

    def test_sample_strauss_returns_configs(self):
        samples = sample_strauss(_model(), ReadOnceStream(77), 5)
        assert len(samples) == 5
        assert all(isinstance(c, PointConfiguration) for c in samples)
