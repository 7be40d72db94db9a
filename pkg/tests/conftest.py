import numpy as np
import pytest

from toaloc.measurement import AnchorArray

_CRITERIA_KEY = pytest.StashKey[dict]()


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run full-scale replication tests")


def pytest_configure(config):
    config.stash[_CRITERIA_KEY] = {}


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="full-scale run; use --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.skipped):
        n, title = marker.args
        status = "PASS" if report.passed else "SKIP" if report.skipped else "FAIL"
        results = item.config.stash[_CRITERIA_KEY]
        prev = results.get(n, (title, "PASS"))[1]
        rank = {"FAIL": 2, "SKIP": 1, "PASS": 0}
        results[n] = (title, status if rank[status] >= rank[prev] else prev)


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash[_CRITERIA_KEY]
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        title, status = results[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {title}")


def random_anchors(rng):
    """Two receivers below the working area with baselines tilted up to 20 degrees."""
    a = rng.uniform(0.5, 3.0)
    pts = []
    for cx in (rng.uniform(-90, -30), rng.uniform(30, 90)):
        c = np.array([cx, rng.uniform(-110, -90)])
        phi = rng.uniform(-0.35, 0.35)
        u = np.array([np.cos(phi), np.sin(phi)])
        pts += [tuple(c), tuple(c + a * u)]
    return AnchorArray(*pts, a)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
