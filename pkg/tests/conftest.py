import sys
from pathlib import Path

import numpy as np
import pytest

from nngpcg import _backend

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(params=sorted(_backend.AVAILABLE))
def backend(request):
    """Run the test once per available kernel backend."""
    prev = _backend.BACKEND
    _backend.use(request.param)
    yield request.param
    _backend.use(prev)


@pytest.fixture
def nprng():
    # numpy's generator only builds test inputs; package randomness goes through RngState
    return np.random.default_rng(20240611)


_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _criteria[num] = (title, "PASS" if rep.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        title, status = _criteria[num]
        terminalreporter.write_line(f"{status} criterion {num}: {title}")
