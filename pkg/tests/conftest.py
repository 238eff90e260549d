import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from riccati_cascade.config import ScenarioConfig
from riccati_cascade.geometry import exp_so3
from riccati_cascade.harness import Scenario

# hypothesis hunts edge cases; the 1000-sample sweeps are vectorized numpy tests
settings.register_profile(
    "suite", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("suite")

_LINES = pytest.StashKey[dict]()
_START = pytest.StashKey[float]()
_IDENTITY = pytest.StashKey[dict]()
SUITE_BUDGET = 120.0


def pytest_configure(config):
    config.stash[_LINES] = {}
    config.stash[_START] = time.perf_counter()
    config.stash[_IDENTITY] = {}
    config.addinivalue_line("markers", "identity_suite: randomized 1000-case identity checks")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if item.get_closest_marker("identity_suite") and (rep.when == "call" or rep.failed):
        item.config.stash[_IDENTITY][item.nodeid] = rep.passed and rep.when == "call"


@pytest.fixture(scope="session")
def acceptance(request):
    """Record one summary line per acceptance criterion, printed at the end of the run."""
    lines = request.config.stash[_LINES]

    def record(number: int, title: str, ok: bool, detail: str):
        lines[number] = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash[_LINES]
    if not lines:
        return
    elapsed = time.perf_counter() - config.stash[_START]
    terminalreporter.section("acceptance criteria")
    for k in sorted(lines):
        terminalreporter.write_line(lines[k])
    ids = config.stash[_IDENTITY]
    passed = sum(ids.values())
    ok = elapsed < SUITE_BUDGET and ids and passed == len(ids)
    terminalreporter.write_line(
        f"criterion 8 [{'PASS' if ok else 'FAIL'}] identity suites and runtime: "
        f"{passed}/{len(ids)} randomized 1000-case checks passed, suite {elapsed:.1f} s (budget {SUITE_BUDGET:.0f} s)"
    )


def random_rotations(rng, n, max_angle=np.pi):
    axes = rng.normal(size=(n, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    return exp_so3(rng.uniform(0.0, max_angle, n)[:, None] * axes)


@pytest.fixture(scope="session")
def reference_cfg():
    return ScenarioConfig()


@pytest.fixture(scope="session")
def reference_run(reference_cfg):
    """
    The 20 s reference scenario. Member 0 of the pose batch starts from the
    configured 0.9 pi attitude; members 1..20 start from random attitudes.
    """
    sc = Scenario(reference_cfg)
    rng = np.random.default_rng(2024)
    extra = random_rotations(rng, 20, 0.95 * np.pi)
    R0 = np.concatenate([reference_cfg.initial_attitude()[None], extra])
    t0 = time.perf_counter()
    res = sc.run(R0)
    return sc, res, time.perf_counter() - t0
