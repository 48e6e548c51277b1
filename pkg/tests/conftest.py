import numpy as np
import pytest

from mdpconc.core import MdpModel, StationaryPolicy, cycle_model, swap_model, symmetric_model


@pytest.fixture
def sym():
    """Uniform rows; action 0 pays 1 in state 0, so pi* = (0, *) with lambda* = 0.5."""
    return symmetric_model([[1.0, 0.5], [0.0, 0.0]])


@pytest.fixture
def sym_policy():
    return StationaryPolicy((0, 0))


@pytest.fixture
def swap():
    return swap_model([[1.0, 1.0], [0.0, 0.0]])


@pytest.fixture
def cycle4():
    return cycle_model(4, [1.0, 0.0, 0.5, 0.25])


@pytest.fixture
def two_sinks():
    """Action 0 makes state 0 absorbing, action 1 makes state 1 absorbing."""
    P = np.zeros((2, 2, 2))
    P[0, 0] = [1, 0]
    P[0, 1] = [0, 1]
    P[1, 0] = [1, 0]
    P[1, 1] = [0, 1]
    return MdpModel(P, [[1.0, 1.0], [0.0, 0.0]], 1.0)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report_line():
    """Record one PASS/FAIL line for the acceptance summary."""
    def add(criterion: int, passed: bool, detail: str, gating: bool = True):
        tag = "PASS" if passed else "FAIL"
        if not gating:
            tag += " (non-gating)"
        line = f"criterion {criterion:>2}: {tag}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
