"""Fallback controllers: fixed-speed pure pursuit and the back-off reflex."""

from __future__ import annotations

import math

from navguard.sensing import to_robot_frame
from navguard.world.state import Pose, Twist

BACKOFF_TWIST = Twist(-0.2, 0.0)


def pursuit_curvature(x_rel: float, y_rel: float) -> float:
    """Curvature of the circular arc through the origin (heading +x) and (x_rel, y_rel)."""
    return 2.0 * y_rel / (x_rel * x_rel + y_rel * y_rel)


def pure_pursuit_action(robot: Pose, waypoint, v_fixed: float = 0.5, w_max: float = 2.0) -> Twist:
    """Track ``waypoint`` at constant speed; rotate in place when it lies behind the robot."""
    x_rel, y_rel = to_robot_frame(robot, waypoint)
    if x_rel == 0.0 and y_rel == 0.0:
        raise ValueError("waypoint coincides with the robot position")
    if x_rel < 0.0:
        return Twist(0.0, w_max if y_rel >= 0.0 else -w_max)
    w = v_fixed * pursuit_curvature(x_rel, y_rel)
    return Twist(v_fixed, min(max(w, -w_max), w_max))


def backoff_action() -> Twist:
    """Slow reverse used when an obstacle is closer than the critical distance."""
    return BACKOFF_TWIST
