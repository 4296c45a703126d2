import numpy as np
import pytest

from crossdiff.pressure import PressureLaw


@pytest.fixture(params=["log", "power"])
def law(request):
    return PressureLaw.logarithmic(1.0) if request.param == "log" else PressureLaw.power(0.5, 1.0)


@pytest.fixture
def s_grid():
    return np.logspace(-2, 2, 100)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
