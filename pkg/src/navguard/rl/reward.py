"""Per-step rewards: dense waypoint progress (variant 1) and sparse waypoint bonus (variant 2)."""

from __future__ import annotations

import math
from dataclasses import dataclass

from navguard.world.sim import distance_to_nearest_obstacle
from navguard.world.state import Twist, WorldState


@dataclass(frozen=True)
class RewardConfig:
    variant: str = "sparse"
    r_timestep: float = -0.5
    collision_dist: float = 0.5
    waypoint_bonus: float = 10.0
    waypoint_margin: float = 0.3
    # literal |d_t - d_t+1| progress instead of the signed form
    absolute_progress: bool = False

    def __post_init__(self):
        if self.variant not in ("dense", "sparse"):
            raise ValueError(f"reward variant must be 'dense' or 'sparse', got {self.variant!r}")


@dataclass(frozen=True)
class RewardTerms:
    total: float
    timestep: float
    collision: float
    progress: float
    waypoint: float
    reached: bool
    clearance: float


def collision_term(clearance: float, speed: float, cfg: RewardConfig) -> float:
    """Penalty for being close and fast: -|v| - 1 inside ``collision_dist``."""
    return -abs(speed) - 1.0 if clearance < cfg.collision_dist else 0.0


def reward_terms(prev: WorldState, cmd: Twist, nxt: WorldState, waypoint,
                 cfg: RewardConfig, clearance: float | None = None) -> RewardTerms:
    if clearance is None:
        clearance = distance_to_nearest_obstacle(nxt)
    d0 = math.hypot(waypoint[0] - prev.robot_pose.x, waypoint[1] - prev.robot_pose.y)
    d1 = math.hypot(waypoint[0] - nxt.robot_pose.x, waypoint[1] - nxt.robot_pose.y)
    reached = d1 < cfg.waypoint_margin
    r_col = collision_term(clearance, cmd.v, cfg)
    progress = waypoint_bonus = 0.0
    if cfg.variant == "dense":
        progress = abs(d0 - d1) if cfg.absolute_progress else d0 - d1
    elif reached:
        waypoint_bonus = cfg.waypoint_bonus
    total = cfg.r_timestep + r_col + progress + waypoint_bonus
    return RewardTerms(total, cfg.r_timestep, r_col, progress, waypoint_bonus, reached, clearance)


def compute_reward(prev: WorldState, cmd: Twist, nxt: WorldState, waypoint,
                   cfg: RewardConfig) -> float:
    return reward_terms(prev, cmd, nxt, waypoint, cfg).total
