import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from careerwage import example_environment, informed_example_environment

settings.register_profile("ci", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")


@pytest.fixture(scope="session")
def example_env():
    return example_environment()


@pytest.fixture(scope="session")
def informed_env():
    return informed_example_environment()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """record(n, ok, detail) stores one summary line per acceptance criterion."""
    def record(n, ok, detail):
        _ACCEPTANCE[n] = f"acceptance {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
