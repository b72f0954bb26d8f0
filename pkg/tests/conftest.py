"""Shared fixtures: cached suite runs, backend restoration, and the
acceptance summary printed after the run."""

import time

import pytest

from rocftp import backend, verify

# Suites are deterministic at a fixed seed, so one run per session is
# shared by every test that inspects suite entries.
_SUITE_CACHE = {}


def run_suite_cached(name, seed=0):
    """Entries plus wall-clock seconds for one named suite."""
    key = (name, seed)
    if key not in _SUITE_CACHE:
        t0 = time.perf_counter()
        entries = verify.run_suite(name, seed=seed)
        _SUITE_CACHE[key] = {
            "entries": entries,
            "seconds": time.perf_counter() - t0,
        }
    return _SUITE_CACHE[key]


@pytest.fixture(scope="session")
def suite():
    return run_suite_cached


@pytest.fixture
def restore_backend():
    yield
    backend.set_backend("auto")


def entry_map(entries):
    return {e["test_name"]: e for e in entries}


def assert_entries_pass(entries, names):
    """Assert the named suite entries all carry a pass verdict."""
    by_name = entry_map(entries)
    missing = [n for n in names if n not in by_name]
    assert not missing, f"suite entries missing: {missing}"
    failed = [n for n in names if by_name[n]["verdict"] != "pass"]
    assert not failed, f"suite entries failed: {[by_name[n] for n in failed]}"


# One line per acceptance criterion at the end of the run, so the
# verdicts are readable without grepping the dotted output.
_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_"):
        return
    if report.when == "setup" and report.skipped:
        _ACCEPTANCE[name] = "SKIP"
    elif report.when == "call":
        _ACCEPTANCE[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"{_ACCEPTANCE[name]:4s} {name}")
