"""Dynamic Window Approach local planner, used as the expert.

The planner only sees the lidar returns (robot frame), the same information
the learner gets through its costmap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from navguard.sensing import LidarScan, to_robot_frame
from navguard.world.state import Twist, WorldState


@dataclass(frozen=True)
class DwaConfig:
    v_samples: int = 7
    w_samples: int = 15
    sim_time: float = 1.5
    dt: float = 0.1
    accel_v: float = 2.5
    accel_w: float = 6.0
    alpha_heading: float = 0.8
    beta_clearance: float = 0.2
    gamma_velocity: float = 0.2
    # above this clearance (m) a rollout is considered fully clear
    clearance_cap: float = 1.0
    # extra distance kept from lidar returns to cover gaps between beams
    safety_margin: float = 0.1
    # turn rate (rad/s) of the in-place recovery used when no sample is admissible
    recovery_w: float = 1.0

    def __post_init__(self):
        if self.v_samples < 2 or self.w_samples < 2:
            raise ValueError("DWA needs at least two samples per velocity axis")
        if not self.sim_time > self.dt > 0:
            raise ValueError("DWA requires sim_time > dt > 0")
        if min(self.alpha_heading, self.beta_clearance, self.gamma_velocity) < 0:
            raise ValueError("DWA weights must be non-negative")

    @property
    def n_steps(self) -> int:
        return int(round(self.sim_time / self.dt))


@dataclass(frozen=True)
class ExpertAction:
    twist: Twist
    feasible: bool


def dynamic_window(v0: float, w0: float, cfg: DwaConfig, v_max: float, w_max: float):
    """Sampled (v, w) grid reachable within one dt under the acceleration limits."""
    v_lo = max(0.0, v0 - cfg.accel_v * cfg.dt)
    v_hi = min(v_max, v0 + cfg.accel_v * cfg.dt)
    if v_lo > v_hi:  # current speed outside bounds (e.g. reversing): brake toward 0
        v_lo = v_hi = min(max(v0, 0.0), v_max)
    w_lo = max(-w_max, w0 - cfg.accel_w * cfg.dt)
    w_hi = min(w_max, w0 + cfg.accel_w * cfg.dt)
    if w_lo > w_hi:
        w_lo = w_hi = min(max(w0, -w_max), w_max)
    vs = np.linspace(v_lo, v_hi, cfg.v_samples)
    ws = np.linspace(w_lo, w_hi, cfg.w_samples)
    if w_lo < 0.0 < w_hi:
        # always offer the straight-line sample
        ws[np.argmin(np.abs(ws))] = 0.0
    vv, ww = np.meshgrid(vs, ws, indexing="ij")
    return vv.ravel(), ww.ravel()


@numba.njit(cache=True)
def rollout_poses(v, w, dt, n_steps):
    """Robot-frame poses k*dt (k = 1..n_steps) of a constant-twist arc from the origin."""
    out = np.empty((n_steps, 3))
    for k in range(1, n_steps + 1):
        t = k * dt
        th = w * t
        if abs(w) < 1e-6:
            out[k - 1, 0] = v * t
            out[k - 1, 1] = 0.0
        else:
            out[k - 1, 0] = v / w * math.sin(th)
            out[k - 1, 1] = v / w * (1.0 - math.cos(th))
        out[k - 1, 2] = th
    return out


@numba.njit(cache=True)
def _score_rollouts(vs, ws, points, wp_x, wp_y, dt, n_steps, radius, margin, cap):
    n = vs.shape[0]
    heading = np.empty(n)
    clearance = np.empty(n)
    ok = np.ones(n, dtype=np.bool_)
    for i in range(n):
        poses = rollout_poses(vs[i], ws[i], dt, n_steps)
        best = np.inf
        for k in range(n_steps):
            px = poses[k, 0]
            py = poses[k, 1]
            for j in range(points.shape[0]):
                dx = points[j, 0] - px
                dy = points[j, 1] - py
                d2 = dx * dx + dy * dy
                if d2 < best:
                    best = d2
        best = math.sqrt(best)
        if best < radius + margin:
            ok[i] = False
        clearance[i] = min(best - radius, cap)
        fx = poses[n_steps - 1, 0]
        fy = poses[n_steps - 1, 1]
        fth = poses[n_steps - 1, 2]
        diff = math.atan2(wp_y - fy, wp_x - fx) - fth
        diff = math.atan2(math.sin(diff), math.cos(diff))
        heading[i] = math.pi - abs(diff)
    return heading, clearance, ok


def _minmax(x: np.ndarray) -> np.ndarray:
    span = x.max() - x.min()
    if span <= 0:
        return np.zeros_like(x)
    return (x - x.min()) / span


def score_window(v0: float, w0: float, points: np.ndarray, waypoint_rel, cfg: DwaConfig,
                 radius: float, v_max: float, w_max: float):
    """Sample the window and evaluate every rollout.

    Returns (v, w, heading, clearance, feasible, total) arrays; ``total`` is NaN
    for infeasible samples.
    """
    vs, ws = dynamic_window(v0, w0, cfg, v_max, w_max)
    reach = float(vs.max()) * cfg.sim_time + radius + cfg.clearance_cap + cfg.safety_margin
    if len(points):
        points = points[np.hypot(points[:, 0], points[:, 1]) <= reach]
    pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
    heading, clearance, ok = _score_rollouts(vs, ws, pts, float(waypoint_rel[0]),
                                             float(waypoint_rel[1]), cfg.dt, cfg.n_steps,
                                             radius, cfg.safety_margin, cfg.clearance_cap)
    total = np.full(vs.shape, np.nan)
    if ok.any():
        total[ok] = (cfg.alpha_heading * _minmax(heading[ok])
                     + cfg.beta_clearance * _minmax(clearance[ok])
                     + cfg.gamma_velocity * _minmax(vs[ok]))
    return vs, ws, heading, clearance, ok, total


def select_best(vs, ws, ok, total) -> int | None:
    """Highest score; ties go to the lowest |w|, then the lowest v."""
    idx = np.nonzero(ok)[0]
    if idx.size == 0:
        return None
    order = np.lexsort((vs[idx], np.abs(ws[idx]), -total[idx]))
    return int(idx[order[0]])


def recovery_twist(scan: LidarScan, wp_rel, cfg: DwaConfig) -> Twist:
    """Turn in place away from the closest return (toward the waypoint side on a tie).

    Used by callers when :func:`dwa_action` reports no feasible sample.
    """
    if cfg.recovery_w == 0.0 or len(scan.ranges) == 0:
        return Twist(0.0, 0.0)
    bearing = math.remainder(float(scan.angles[int(np.argmin(scan.ranges))]), 2.0 * math.pi)
    side = -math.copysign(1.0, bearing) if abs(bearing) > 1e-9 else math.copysign(1.0, wp_rel[1])
    return Twist(0.0, side * cfg.recovery_w)


def dwa_action(state: WorldState, scan: LidarScan, waypoint, cfg: DwaConfig = DwaConfig()) -> ExpertAction:
    """Expert twist toward ``waypoint`` (world frame) from the current lidar scan."""
    rc = state.robot
    wp_rel = to_robot_frame(state.robot_pose, waypoint)
    vs, ws, _, _, ok, total = score_window(state.robot_twist.v, state.robot_twist.w,
                                           scan.hit_points(), wp_rel, cfg, rc.radius,
                                           rc.v_max, rc.w_max)
    best = select_best(vs, ws, ok, total)
    if best is None:
        return ExpertAction(Twist(0.0, 0.0), feasible=False)
    return ExpertAction(Twist(float(vs[best]), float(ws[best])), feasible=True)
