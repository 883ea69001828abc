import numpy as np
import pytest

from lidarprop.calib import CalibrationSet

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def simple_calib(f=100.0, cx=50.0, cy=50.0, image_size=(100, 100), axis_swap=True):
    """Pinhole calibration with zero translation.

    With ``axis_swap`` the velodyne axes (x fwd, y left, z up) map to the
    camera axes (x right, y down, z fwd); otherwise the transform is the
    identity and velodyne z is the viewing direction.
    """
    P = np.array([[f, 0, cx, 0], [0, f, cy, 0], [0, 0, 1, 0]], dtype=float)
    if axis_swap:
        R = np.array([[0, -1, 0], [0, 0, -1], [1, 0, 0]], dtype=float)
    else:
        R = np.eye(3)
    Tr = np.column_stack([R, np.zeros(3)])
    return CalibrationSet(P, np.eye(3), Tr, image_size)
