import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ctdelab.core import brute_force_optimal
from ctdelab.envs import make_env

settings.register_profile("ctdelab", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ctdelab")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def m1():
    return make_env("m1")


@pytest.fixture(scope="session")
def m2():
    return make_env("m2")


@pytest.fixture(scope="session")
def tiger():
    return make_env("dec-tiger")


@pytest.fixture(scope="session")
def tiger_optimum(tiger):
    """Brute-force horizon-3 Dec-Tiger optimum (a few seconds; computed once)."""
    return brute_force_optimal(tiger)


def pytest_terminal_summary(terminalreporter):
    from helpers import CRITERIA
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        checks = CRITERIA[n]
        verdict = "PASS" if all(ok for _, ok, _ in checks) else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {verdict}")
        for name, ok, detail in checks:
            terminalreporter.write_line(f"    {'ok  ' if ok else 'FAIL'} {name}: {detail}")
