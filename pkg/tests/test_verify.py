"""Statistical harness: GOF tests, oracles, performance checks, suites."""

import math

import numpy as np
import pytest
from scipy import stats as sps

from rocftp.chains import LazyWalkCoupling
from rocftp.points import Rectangle
from rocftp.strauss import StraussModel
from rocftp.verify import (
    SUITE_NAMES,
    GofReport,
    chi_square_gof,
    contingency_chi_square,
    estimate_t_hat,
    ks_test,
    performance_harness,
    run_audit,
    run_suite,
    strauss_rejection_oracle,
    survival_decay_ok,
    tv_distance,
    two_sample_chi_square,
)


class TestChiSquareGof:
    def test_exact_proportions_give_zero_statistic(self):
        report = chi_square_gof([300, 700], [0.3, 0.7])
        assert report.statistic == 0.0
        assert report.p_value == 1.0
        assert report.verdict == "pass"
        assert report.df == 1 and report.n == 1000

    def test_near_fair_coin(self):
        # (50100, 49900) against a fair coin: each cell contributes
        # 100^2 / 50000 = 0.2, so the statistic is 0.4 on 1 df.
        report = chi_square_gof([50100, 49900], [0.5, 0.5])
        assert report.statistic == pytest.approx(0.4, abs=1e-12)
        assert report.p_value == pytest.approx(
            float(sps.chi2.sf(0.4, 1)), abs=1e-12
        )
        assert 0.52 < report.p_value < 0.53
        assert report.verdict == "pass"

    def test_detects_wrong_law(self):
        report = chi_square_gof([6000, 4000], [0.5, 0.5])
        assert report.verdict == "fail"
        assert report.p_value < 1e-6

    def test_pools_small_cells(self):
        report = chi_square_gof([500, 497, 2, 1], [0.5, 0.49, 0.007, 0.003])
        assert report.df == 2

    def test_pooling_can_exhaust_cells(self):
        with pytest.raises(ValueError):
            chi_square_gof([996, 3, 1], [0.996, 0.003, 0.001])

    def test_input_validation(self):
        with pytest.raises(ValueError):
            chi_square_gof([1, 2, 3], [0.5, 0.5])
        with pytest.raises(ValueError):
            chi_square_gof([0, 0], [0.5, 0.5])


class TestTwoSampleChiSquare:
    def test_identical_histograms(self):
        report = two_sample_chi_square([100, 200, 300], [100, 200, 300])
        assert report.statistic == 0.0
        assert report.p_value == 1.0

    def test_detects_difference(self):
        report = two_sample_chi_square([1000, 9000], [9000, 1000])
        assert report.p_value < 1e-6

    def test_pools_jointly(self):
        report = two_sample_chi_square([5000, 10, 2, 0], [5000, 8, 1, 3])
        assert report.df == 1
        assert report.verdict == "pass"

    def test_input_validation(self):
        with pytest.raises(ValueError):
            two_sample_chi_square([1, 2], [1, 2, 3])
        with pytest.raises(ValueError):
            two_sample_chi_square([0, 0], [1, 2])


class TestContingency:
    def test_independent_table(self):
        report = contingency_chi_square([[40, 60], [20, 30]])
        assert report.statistic == pytest.approx(0.0, abs=1e-12)
        assert report.df == 1

    def test_dependent_table(self):
        report = contingency_chi_square([[90, 10], [10, 90]])
        assert report.p_value < 1e-6

    def test_input_validation(self):
        with pytest.raises(ValueError):
            contingency_chi_square([1, 2, 3])
        with pytest.raises(ValueError):
            contingency_chi_square([[1, 1], [1, 100]])


class TestKsTest:
    def test_near_perfect_fit(self):
        n = 500
        xs = (np.arange(1, n + 1) - 0.5) / n
        report = ks_test(xs, lambda t: t)
        assert report.statistic == pytest.approx(0.5 / n)
        assert report.p_value > 0.999

    def test_detects_wrong_cdf(self):
        xs = np.sort(np.linspace(0.01, 0.99, 500) ** 2)
        report = ks_test(xs, lambda t: t)
        assert report.p_value < 1e-6

    def test_needs_two_samples(self):
        with pytest.raises(ValueError):
            ks_test([0.5], lambda t: t)


class TestTvDistance:
    def test_identical(self):
        assert tv_distance({0: 3, 1: 7}, {0: 0.3, 1: 0.7}) == 0.0

    def test_disjoint(self):
        assert tv_distance({0: 5}, {1: 5}) == 1.0

    def test_half_overlap(self):
        assert tv_distance({0: 1, 1: 1}, {0: 2}) == 0.5

    def test_arrays(self):
        assert tv_distance([1, 1], [1, 1]) == 0.0
        with pytest.raises(ValueError):
            tv_distance([1, 1], [1, 1, 1])


def test_gof_report_verdict_threshold():
    assert GofReport(1.0, 1, 0.0009, 100).verdict == "fail"
    assert GofReport(1.0, 1, 0.001, 100).verdict == "pass"


class TestRejectionOracle:
    def test_gamma_one_is_poisson(self):
        model = StraussModel(
            lambda_=1.0, gamma=1.0, r=0.5, region=Rectangle(2.0, 1.0)
        )
        counts = strauss_rejection_oracle(model, 4000, seed=5)
        hist: dict[int, int] = {}
        for c in counts:
            hist[c] = hist.get(c, 0) + 1
        top = max(hist) + 1
        probs = [math.exp(-2.0) * 2.0**i / math.factorial(i) for i in range(top)]
        probs.append(max(1.0 - sum(probs), 0.0))
        obs = [hist.get(i, 0) for i in range(top)] + [0]
        assert chi_square_gof(obs, probs).verdict == "pass"

    def test_hard_core_with_huge_radius(self):
        # r larger than the region diameter: any second point conflicts,
        # so conditioning Poisson(1) on {0, 1} points gives a fair coin.
        model = StraussModel(
            lambda_=1.0, gamma=0.0, r=10.0, region=Rectangle(1.0, 1.0)
        )
        counts = strauss_rejection_oracle(model, 2000, seed=6)
        assert set(counts) <= {0, 1}
        ones = sum(counts)
        assert abs(ones / 2000 - 0.5) <= 4.0 * math.sqrt(0.25 / 2000)


class TestSurvivalDecay:
    def test_geometric_tail_passes(self):
        n = 2**14
        maps = []
        for g in range(14):
            maps.extend([5 + 10 * g] * (n >> (g + 1)))
        ok, ratios = survival_decay_ok(maps, 10.0)
        assert ok
        assert len(ratios) >= 2
        assert all(1.8 < r < 2.2 for r in ratios)

    def test_slow_tail_fails(self):
        n = 100_000
        levels = [int(n / 1.2**k) for k in range(60)]
        maps = []
        for g in range(59):
            maps.extend([5 + 10 * g] * (levels[g] - levels[g + 1]))
        ok, ratios = survival_decay_ok(maps, 10.0)
        assert not ok
        assert len(ratios) >= 2

    def test_degenerate_tail_reports_false(self):
        ok, ratios = survival_decay_ok([100] * 1000, 10.0)
        assert (ok, ratios) == (False, [])


def _pair_meeting_moments(n):
    # The from-scratch composition tracks the interval of extremes, so
    # its map count is the meeting time of the boundary pair (0, n-1)
    # under the shared hold/down/up map; solve the absorbing chain.
    top = n - 1
    pairs = [(lo, hi) for lo in range(n) for hi in range(lo + 1, n)]
    index = {p: i for i, p in enumerate(pairs)}

    def step(pair, move):
        lo, hi = pair
        if move < 0:
            return (max(lo - 1, 0), max(hi - 1, 0))
        if move > 0:
            return (min(lo + 1, top), min(hi + 1, top))
        return pair

    m = len(pairs)
    q = np.zeros((m, m))
    for pair, i in index.items():
        for move, w in ((0, 0.5), (-1, 0.25), (1, 0.25)):
            nxt = step(pair, move)
            if nxt[0] != nxt[1]:
                q[i, index[nxt]] += w
    fundamental = np.eye(m) - q
    first = np.linalg.solve(fundamental, np.ones(m))
    second = np.linalg.solve(fundamental, 1.0 + 2.0 * q.dot(first))
    start = index[(0, top)]
    mean = first[start]
    var = second[start] - mean * mean
    return mean, math.sqrt(var)


def test_estimate_t_hat_matches_absorbing_chain():
    coupling = LazyWalkCoupling(11)
    mean, sd = _pair_meeting_moments(11)
    draws = 4000
    t_hat = estimate_t_hat(coupling, seed=0, draws=draws)
    assert abs(t_hat - mean) <= 4.0 * sd / math.sqrt(draws)


def test_performance_harness_structure():
    result = performance_harness(k=2000, seed=0, t_est_draws=200)
    assert result["chain"].startswith("lazy-walk")
    assert result["t_hat"] > 0
    rows = result["rows"]
    assert [row["engine"] for row in rows] == [
        "citp", "read-once", "binary-backoff",
    ]
    for row in rows:
        assert row["samples"] == 2000
        assert 0 < row["mean_maps"]
        assert row["median_maps"] <= row["p99_maps"]
        if row["engine"] == "citp":
            # From-scratch composition costs one coalescence time per draw.
            assert 0.9 < row["maps_per_t"] < 1.1
        else:
            assert 1.5 < row["maps_per_t"] < 6.0
        assert row["words"] > 0
        if row["engine"] == "binary-backoff":
            assert row["replay_events"] > 0
        else:
            assert row["replay_events"] == 0
    with pytest.raises(ValueError):
        performance_harness(engines=("warp",), k=10, t_est_draws=10)


def test_run_suite_validation():
    assert set(SUITE_NAMES) == {
        "exactness", "performance", "ciaftp", "strauss", "all",
    }
    with pytest.raises(ValueError):
        run_suite("nonsense")


def test_run_audit_fresh_seed():
    seed, entries = run_audit("ciaftp", n_samples=2000)
    assert isinstance(seed, int)
    assert len(entries) == 4
    for entry in entries:
        assert entry["test_name"].startswith("ciaftp:")
        assert entry["verdict"] in ("pass", "fail")
        assert set(entry) == {"test_name", "statistic", "p_value", "verdict"}
    failures = [e for e in entries if e["verdict"] == "fail"]
    assert len(failures) <= 1
