import numpy as np
import pytest

from navguard.world.grid import walled_room
from navguard.world.state import Pose, RobotConfig, WorldState


def room_state(width=6.0, height=6.0, pose=None, radius=0.3, pedestrians=(), pillars=None, **kw):
    """A robot in an empty walled room; the interior spans [0.1, 0.1 + width] on each axis."""
    m = walled_room(width, height, pillars=pillars)
    if pose is None:
        pose = Pose(0.1 + width / 2, 0.1 + height / 2, 0.0)
    return WorldState(map=m, robot_pose=pose, pedestrians=tuple(pedestrians),
                      robot=RobotConfig(radius=radius), **kw)


def brute_force_clearance(state) -> float:
    """Exhaustive scan over every occupied cell square and pedestrian disc."""
    m = state.map
    x, y = state.robot_pose.x, state.robot_pose.y
    iy, ix = np.nonzero(m.cells)
    x0, y0 = ix * m.resolution, iy * m.resolution
    dx = np.maximum(np.maximum(x0 - x, 0.0), x - (x0 + m.resolution))
    dy = np.maximum(np.maximum(y0 - y, 0.0), y - (y0 + m.resolution))
    best = float(np.min(np.hypot(dx, dy))) - state.robot.radius
    for p in state.pedestrians:
        best = min(best, float(np.hypot(*(p.position - [x, y]))) - state.robot.radius - p.radius)
    return max(best, 0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
