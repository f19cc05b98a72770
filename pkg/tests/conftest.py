import numpy as np
import pytest

from iabsim.radio import RadioParams
from iabsim.topology import Topology


def line_topology(*xs, y=0.0):
    """ABS at the origin, SBSs on a horizontal line."""
    return Topology((0.0, 0.0), np.array([[x, y] for x in xs], dtype=float))


@pytest.fixture
def table_params():
    return RadioParams()


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one labelled pass/fail line per acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
