import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from lseforge import _accel  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

PATHS = [True, False] if _accel.HAS_NUMBA else [False]


@pytest.fixture(params=PATHS, ids=lambda j: "numba" if j else "numpy")
def kernel_path(request):
    """Run the test once on the compiled kernels and once on the numpy fallback."""
    with _accel.jit_mode(request.param):
        yield request.param


@pytest.fixture(scope="session")
def trained_runs():
    from fixtures import acceptance_runs
    return acceptance_runs()


@pytest.fixture(scope="session")
def filter_rows():
    from fixtures import acceptance_filter_sweep
    return acceptance_filter_sweep()


def pytest_terminal_summary(terminalreporter):
    from fixtures import ACCEPTANCE_LINES
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
