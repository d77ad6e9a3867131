"""Value types for the simulator: poses, twists, pedestrians and the world state."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

from navguard.world.grid import OccupancyMap


def normalize_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class Twist:
    v: float = 0.0
    w: float = 0.0

    def clamped(self, v_max: float, w_max: float, v_min: float | None = None) -> "Twist":
        lo = -v_max if v_min is None else v_min
        return Twist(min(max(self.v, lo), v_max), min(max(self.w, -w_max), w_max))


@dataclass(frozen=True, eq=False)
class Pedestrian:
    position: np.ndarray
    velocity: np.ndarray
    goal: np.ndarray
    desired_speed: float = 1.0
    radius: float = 0.25
    # patrol_origin is where the pedestrian turns around after reaching goal
    patrol_origin: np.ndarray | None = None

    def __post_init__(self):
        if self.desired_speed <= 0 or self.radius <= 0:
            raise ValueError("pedestrian desired_speed and radius must be positive")
        for name in ("position", "velocity", "goal"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if self.patrol_origin is None:
            object.__setattr__(self, "patrol_origin", self.position.copy())

    @property
    def speed(self) -> float:
        return float(np.hypot(*self.velocity))


@dataclass(frozen=True)
class SocialForceParams:
    relaxation_time: float = 0.5
    repulsion_strength_A: float = 2.0
    repulsion_range_B: float = 0.3
    wall_strength: float = 2.0
    wall_range: float = 0.3
    max_speed_factor: float = 1.5
    # interactions farther than this (surface to surface) exert no force
    cutoff: float = 2.0
    robot_strength: float = 6.0
    # robot repulsion is rotated clockwise by this angle (rad) so that
    # pedestrians step aside instead of stalling head-on in front of the robot
    robot_deflection: float = 0.4
    goal_tolerance: float = 0.5

    def __post_init__(self):
        for name in ("relaxation_time", "repulsion_strength_A", "repulsion_range_B",
                     "wall_strength", "wall_range", "max_speed_factor", "cutoff"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class RobotConfig:
    radius: float = 0.3
    v_max: float = 1.0
    w_max: float = 2.0
    # None means an ideal velocity-controlled base
    accel_v: float | None = None
    accel_w: float | None = None


@dataclass(frozen=True, eq=False)
class WorldState:
    map: OccupancyMap
    robot_pose: Pose
    robot_twist: Twist = Twist()
    pedestrians: tuple[Pedestrian, ...] = ()
    time: float = 0.0
    rng_seed: int = 0
    robot: RobotConfig = RobotConfig()
    social: SocialForceParams = SocialForceParams()
    collision: bool = False
    goal: np.ndarray | None = field(default=None, compare=False)

    def evolve(self, **changes) -> "WorldState":
        return replace(self, **changes)

    def fingerprint(self) -> str:
        """Digest of every numeric field; equal digests mean bitwise-identical states."""
        h = hashlib.sha256()
        h.update(np.asarray([self.robot_pose.x, self.robot_pose.y, self.robot_pose.theta,
                             self.robot_twist.v, self.robot_twist.w, self.time],
                            dtype=np.float64).tobytes())
        h.update(bytes([self.collision]))
        for p in self.pedestrians:
            for arr in (p.position, p.velocity, p.goal, p.patrol_origin):
                h.update(arr.tobytes())
            h.update(np.float64(p.desired_speed).tobytes())
        if self.goal is not None:
            h.update(np.asarray(self.goal, dtype=np.float64).tobytes())
        return h.hexdigest()
