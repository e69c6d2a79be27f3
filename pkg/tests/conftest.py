import numpy as np
import pytest

from aoiseq.geometry import AreaOfInterest, InterfaceLayout, Trajectory


@pytest.fixture
def two_areas():
    return InterfaceLayout([AreaOfInterest("A", 10, 10, 20, 20), AreaOfInterest("B", 60, 10, 20, 20)])


@pytest.fixture
def three_areas():
    return InterfaceLayout(
        [
            AreaOfInterest("P", 0, 0, 10, 10),
            AreaOfInterest("Q", 100, 0, 10, 10),
            AreaOfInterest("R", 0, 100, 40, 40),
        ]
    )


def traj(points, label=None, id=None):
    return Trajectory(np.array(points, dtype=float), label=label, id=id)


def pytest_terminal_summary(terminalreporter):
    acceptance = __import__("sys").modules.get("test_acceptance")
    results = getattr(acceptance, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
