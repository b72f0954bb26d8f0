"""Composed-map reference engine and the grand-coupling contracts."""

import numpy as np
import pytest
from scipy import stats as sps

from rocftp.chains import exact_stationary
from rocftp.chains.toy import ConstantMapChain, IdentityMapChain, TwoStateMapChain
from rocftp.core import (
    compose_into_the_past,
    compose_into_the_past_biased,
)
from rocftp.errors import CapExceededError, NonCoalescenceError
from rocftp.stream import ReadOnceStream


def _chi_square_p(counts, probs):
    counts = np.asarray(counts, dtype=float)
    expected = counts.sum() * np.asarray(probs, dtype=float)
    stat = ((counts - expected) ** 2 / expected).sum()
    return float(sps.chi2.sf(stat, len(counts) - 1))


def test_citp_samples_exact_stationary():
    chain = TwoStateMapChain()
    pi = exact_stationary(chain)
    stream = ReadOnceStream(100)
    counts = np.zeros(2)
    for _ in range(20_000):
        state, maps = compose_into_the_past(chain, stream)
        assert maps >= 1
        counts[state] += 1
    assert _chi_square_p(counts, pi) >= 0.001


def test_biased_composition_matches_wrong_law_and_fails_pi():
    # Composing the newest map on the left makes the output the constant
    # of the first constant map drawn, so the biased law is just the
    # constant maps' relative weights: 0.1 : 0.3 here.
    chain = TwoStateMapChain()
    pi = exact_stationary(chain)
    biased_law = np.array([0.1, 0.3]) / 0.4
    stream = ReadOnceStream(101)
    counts = np.zeros(2)
    for _ in range(20_000):
        state, _ = compose_into_the_past_biased(chain, stream)
        counts[state] += 1
    assert _chi_square_p(counts, biased_law) >= 0.001
    assert _chi_square_p(counts, pi) < 1e-6


def test_constant_map_chain_coalesces_in_one_map():
    chain = ConstantMapChain(3)
    stream = ReadOnceStream(5)
    counts = np.zeros(3)
    for _ in range(6000):
        state, maps = compose_into_the_past(chain, stream)
        assert maps == 1
        counts[state] += 1
    # Every map is constant with a uniform constant, so outputs are uniform.
    assert _chi_square_p(counts, np.full(3, 1 / 3)) >= 0.001


def test_identity_chain_hits_map_cap():
    chain = IdentityMapChain()
    with pytest.raises(NonCoalescenceError):
        compose_into_the_past(chain, ReadOnceStream(0), map_cap=500)


def test_state_cap_refuses_large_spaces():
    from rocftp.chains import make_chain

    chain = make_chain("ising", size=3)
    with pytest.raises(CapExceededError):
        compose_into_the_past(chain, ReadOnceStream(0), state_cap=100)


def test_citp_deterministic_per_seed():
    chain = TwoStateMapChain()
    runs = []
    for _ in range(2):
        stream = ReadOnceStream(77)
        runs.append([compose_into_the_past(chain, stream) for _ in range(50)])
    assert runs[0] == runs[1]


def test_apply_random_map_shares_one_draw():
    # The optional state argument must ride the same drawn map and leave
    # word consumption unchanged.
    chain = TwoStateMapChain()
    a, b = ReadOnceStream(9), ReadOnceStream(9)
    for _ in range(200):
        sset_a, out_a = chain.apply_random_map(a, chain.full_state_set(), 0)
        sset_b, out_b = chain.apply_random_map(b, chain.full_state_set())
        assert sset_a == sset_b
        assert out_b is None
        assert a.position == b.position
