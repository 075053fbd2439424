import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rpsvr.data import Dataset  # noqa: E402


@pytest.fixture
def l2_data():
    """Two points on the line y = x; the optimum is w = 0.8, b = 0.1 at eps = 0.1."""
    return Dataset(np.array([[0.0], [1.0]]), np.array([0.0, 1.0]))


# acceptance verdicts, printed as one PASS/FAIL line per criterion at the end of the run
_VERDICTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when == "teardown" or (rep.when == "setup" and rep.passed):
        return
    number, title = mark.args
    detail = dict(item.user_properties).get("detail", "")
    _VERDICTS[number] = ("PASS" if rep.passed else "FAIL", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_VERDICTS):
        status, title, detail = _VERDICTS[n]
        line = f"{status} criterion {n:>2}: {title}"
        terminalreporter.write_line(f"{line}  [{detail}]" if detail else line)
