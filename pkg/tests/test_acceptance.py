"""Acceptance gate: one test per stated criterion, at full scale.

Most criteria are judged on the cached seed-0 verification suites (one
run per suite per session, shared across tests); the composite-map
contract and the figure-scale runs are exercised directly.
"""

import json
import math
import subprocess
import sys
import time
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from conftest import assert_entries_pass, entry_map

from rocftp import backend
from rocftp.chains import exact_stationary, make_chain
from rocftp.engines import (
    COMPOSITE_VARIANTS,
    apply_composite_map_interleaved,
    apply_composite_map_memory,
)
from rocftp.stream import ReadOnceStream
from rocftp.verify import run_suite, two_sample_chi_square

CHAINS = ("lazy-walk", "sort", "ising")


def test_criterion_01_exactness_finite_chains(suite):
    result = suite("exactness")
    names = [
        f"exact:{chain}:read-once:{variant}"
        for chain in CHAINS
        for variant in COMPOSITE_VARIANTS
    ]
    assert len(names) == 9
    assert_entries_pass(result["entries"], names)
    assert result["seconds"] < 120.0


def test_criterion_02_engine_agreement(suite):
    entries = suite("exactness")["entries"]
    assert_entries_pass(
        entries,
        [f"exact:{chain}:binary-backoff" for chain in CHAINS]
        + [f"agree:{chain}:read-once-vs-binary-backoff" for chain in CHAINS],
    )


def test_criterion_03_negative_control_power(suite):
    entries = suite("exactness")["entries"]
    assert_entries_pass(
        entries,
        ["negative-control:correct-order", "negative-control:biased-rejected"],
    )
    rejected = entry_map(entries)["negative-control:biased-rejected"]
    assert rejected["p_value"] < 1e-6


def test_criterion_04_composite_map_contract():
    # Feed each composite procedure independent stationary inputs and
    # compare flag frequency and the joint (flag, state) law.
    coupling = make_chain("lazy-walk", n=11)
    pi = exact_stationary(coupling)
    n = 100_000
    rng = np.random.Generator(np.random.PCG64(401))
    inputs = rng.choice(11, size=n, p=pi)
    joint = {}
    for proc, seed in (
        (apply_composite_map_interleaved, 402),
        (apply_composite_map_memory, 403),
    ):
        stream = ReadOnceStream(seed)
        counts = np.zeros(22)
        flags = 0
        for state in inputs:
            out = proc(coupling, stream, int(state))
            flags += 1 if out.coalesced else 0
            counts[2 * out.state + (1 if out.coalesced else 0)] += 1
        assert flags / n >= 0.5 - 4.0 * math.sqrt(0.25 / n)
        joint[proc.__name__] = counts
    report = two_sample_chi_square(
        joint["apply_composite_map_interleaved"],
        joint["apply_composite_map_memory"],
    )
    assert report.p_value >= 0.001


def test_criterion_05_performance_constants(suite):
    entries = suite("performance")["entries"]
    assert_entries_pass(
        entries,
        [
            "perf:read-once:maps-per-sample-in-2-5-t",
            "perf:read-once:updates-per-sample-le-6t",
            "perf:binary-backoff:maps-per-sample-in-2-4.5-t",
        ],
    )
    by_name = entry_map(entries)
    assert 2.0 <= by_name["perf:read-once:maps-per-sample-in-2-5-t"]["statistic"] <= 5.0
    bb = by_name["perf:binary-backoff:maps-per-sample-in-2-4.5-t"]
    assert 2.0 <= bb["statistic"] <= 4.5


def test_criterion_06_read_once_enforcement(suite):
    entries = suite("exactness")["entries"]
    assert_entries_pass(
        entries,
        [
            f"read-once-discipline:{chain}:{variant}"
            for chain in CHAINS
            for variant in COMPOSITE_VARIANTS
        ]
        + [f"replay-discipline:{chain}:binary-backoff" for chain in CHAINS],
    )


def test_criterion_07_tail_decay(suite):
    assert_entries_pass(
        suite("performance")["entries"],
        ["perf:read-once:tail-decay-factor-1.5-per-t"],
    )


def test_criterion_08_successive_sample_independence(suite):
    assert_entries_pass(
        suite("performance")["entries"],
        ["perf:read-once:successive-sample-independence"],
    )


def test_criterion_09_ciaftp_laws(suite):
    assert_entries_pass(
        suite("ciaftp")["entries"],
        [
            "ciaftp:k4-rooted-tree-law",
            "ciaftp:k4-trees-valid",
            "ciaftp:toy-output-law",
            "ciaftp:toy-length-matches-first-coalescence",
        ],
    )


def test_criterion_10a_strauss_poisson_reduction(suite):
    assert_entries_pass(
        suite("strauss")["entries"], ["strauss:gamma-1-point-count-vs-poisson"]
    )


def test_criterion_10b_strauss_oracle_tv(suite):
    entries = suite("strauss")["entries"]
    assert_entries_pass(entries, ["strauss:point-count-tv-vs-rejection-oracle"])
    tv = entry_map(entries)["strauss:point-count-tv-vs-rejection-oracle"]
    assert tv["statistic"] < 0.02


def test_criterion_10c_strauss_first_phase_duration(suite):
    assert_entries_pass(
        suite("strauss")["entries"], ["strauss:first-phase-duration-ks"]
    )


def _figure_run(tmp_path, tag, lam, gamma):
    svg = tmp_path / f"{tag}.svg"
    csv = tmp_path / f"{tag}.csv"
    t0 = time.perf_counter()
    proc = subprocess.run(
        [
            sys.executable, "-m", "rocftp.cli", "strauss",
            "--lambda", str(lam), "--gamma", str(gamma), "--radius", "1",
            "--width", "20", "--height", "20", "--samples", "1",
            "--seed", "3", "--svg", str(svg), "--csv", str(csv),
        ],
        capture_output=True,
        text=True,
        timeout=620,
    )
    elapsed = time.perf_counter() - t0
    assert proc.returncode == 0, proc.stderr
    assert elapsed < 600.0
    root = ET.fromstring(svg.read_text())
    circles = root.findall("{http://www.w3.org/2000/svg}circle")
    rows = csv.read_text().splitlines()
    assert len(circles) == len(rows) > 0
    for circle in circles:
        assert 0.0 <= float(circle.get("cx")) <= 20.0
        assert 0.0 <= float(circle.get("cy")) <= 20.0
    return json.loads(proc.stdout)


@pytest.mark.skipif(
    not backend.have_compiled(),
    reason="figure-scale runs need the compiled event loop to fit the budget",
)
def test_criterion_10d_figure_scale_runs(tmp_path):
    soft = _figure_run(tmp_path, "soft", lam=2, gamma=0.5)
    assert soft["mean_points"] > 0
    hard = _figure_run(tmp_path, "hard", lam=1, gamma=0)
    assert hard["mean_points"] > 0
    assert hard["rejected"] == 0


def test_criterion_11_suite_determinism(suite):
    cached = []
    for name in ("exactness", "performance", "ciaftp", "strauss"):
        cached.extend(suite(name)["entries"])
    fresh = run_suite("all", seed=0)
    assert json.dumps(fresh, sort_keys=True) == json.dumps(cached, sort_keys=True)


def test_all_suite_entries_pass(suite):
    # Catch-all: no suite entry may fail at the pinned seed, including
    # the ones not named by a specific criterion.
    for name in ("exactness", "performance", "ciaftp", "strauss"):
        entries = suite(name)["entries"]
        assert_entries_pass(entries, [e["test_name"] for e in entries])
