"""Shared fixtures.  Flow-count results are expensive, so they are cached per session."""

import random
import re

import pytest

from morsefam import catalog
from morsefam.flowcount import (
    bundle,
    count_bundle,
    emit_cubical,
    metric_continuation,
    regularity_check,
)


@pytest.fixture
def rng():
    return random.Random(20240611)


@pytest.fixture(scope="session")
def klein_bundle():
    return bundle("klein")


@pytest.fixture(scope="session")
def klein_counts(klein_bundle):
    return count_bundle(klein_bundle)


@pytest.fixture(scope="session")
def klein_regularity(klein_bundle, klein_counts):
    return regularity_check(klein_bundle, klein_counts, eps=1e-3, trials=5, seed=0)


@pytest.fixture(scope="session")
def klein_two_metrics():
    return bundle("klein"), bundle("klein", metric_seed=3, eps=0.2)


@pytest.fixture(scope="session")
def klein_continuation(klein_two_metrics):
    return metric_continuation(*klein_two_metrics)


@pytest.fixture(scope="session")
def klein_cubical_emitted(klein_bundle):
    return emit_cubical(klein_bundle)


@pytest.fixture
def klein():
    return catalog.klein()



# acceptance tests are named test_criterion_NN_*; one summary line per criterion
_CRITERION = re.compile(r"test_criterion_(\d+)_")
_VERDICTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_VERDICTS] = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m or (report.when != "call" and report.passed):
        return
    store = _config.stash[_VERDICTS]
    n = int(m.group(1))
    store[n] = store.get(n, True) and report.passed


_config = None


@pytest.hookimpl(tryfirst=True)
def pytest_sessionstart(session):
    global _config
    _config = session.config


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash[_VERDICTS]
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(store):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if store[n] else 'FAIL'}")
