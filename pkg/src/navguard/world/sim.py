"""Stepping the world: differential-drive kinematics, social-force pedestrians, clearance."""

from __future__ import annotations

import math

import numpy as np

from navguard.world.grid import nearest_occupied
from navguard.world.state import Pedestrian, Pose, Twist, WorldState

STRAIGHT_EPS = 1e-6


def integrate_arc(pose: Pose, v: float, w: float, dt: float) -> Pose:
    """Exact unicycle motion for constant (v, w) over dt."""
    if abs(w) < STRAIGHT_EPS:
        return Pose(pose.x + v * dt * math.cos(pose.theta),
                    pose.y + v * dt * math.sin(pose.theta), pose.theta + w * dt)
    th1 = pose.theta + w * dt
    r = v / w
    return Pose(pose.x + r * (math.sin(th1) - math.sin(pose.theta)),
                pose.y - r * (math.cos(th1) - math.cos(pose.theta)), th1)


def _penetration(state: WorldState, x: float, y: float) -> float:
    """Largest overlap depth of the robot disc at (x, y) with any obstacle; 0 when clear."""
    r = state.robot.radius
    d, _, _ = nearest_occupied(state.map, x, y)
    pen = r - d
    for p in state.pedestrians:
        pen = max(pen, r + p.radius - math.hypot(x - p.position[0], y - p.position[1]))
    return max(pen, 0.0)


def limit_command(state: WorldState, cmd: Twist, dt: float) -> Twist:
    rc = state.robot
    v, w = cmd.v, cmd.w
    if rc.accel_v is not None:
        dv = rc.accel_v * dt
        v = min(max(v, state.robot_twist.v - dv), state.robot_twist.v + dv)
    if rc.accel_w is not None:
        dw = rc.accel_w * dt
        w = min(max(w, state.robot_twist.w - dw), state.robot_twist.w + dw)
    return Twist(v, w).clamped(rc.v_max, rc.w_max)


def step_robot(state: WorldState, cmd: Twist, dt: float) -> WorldState:
    """Advance the robot by one tick; translation halts at first contact and raises the collision flag.

    The heading change is always applied: turning in place never changes a disc's footprint.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    cmd = limit_command(state, cmd, dt)
    start = state.robot_pose
    target = integrate_arc(start, cmd.v, cmd.w, dt)
    pen0 = _penetration(state, start.x, start.y)
    pen1 = _penetration(state, target.x, target.y)
    if pen1 == 0.0 or (pen0 > 0.0 and pen1 < pen0):
        pose, twist, collided = target, cmd, pen1 > 0.0
    elif pen0 > 0.0:
        pose, twist, collided = Pose(start.x, start.y, target.theta), Twist(0.0, cmd.w), True
    else:
        # bisect the fraction of the arc that stays clear
        lo, hi = 0.0, 1.0
        for _ in range(12):
            mid = 0.5 * (lo + hi)
            probe = integrate_arc(start, cmd.v, cmd.w, dt * mid)
            if _penetration(state, probe.x, probe.y) == 0.0:
                lo = mid
            else:
                hi = mid
        part = integrate_arc(start, cmd.v, cmd.w, dt * lo)
        pose = Pose(part.x, part.y, target.theta)
        twist, collided = Twist(0.0, cmd.w), True
    return state.evolve(robot_pose=pose, robot_twist=twist, time=state.time + dt,
                        collision=bool(collided))


def distance_to_nearest_obstacle(state: WorldState) -> float:
    """Clearance between the robot disc and the closest wall cell or pedestrian disc, floored at 0."""
    x, y = state.robot_pose.x, state.robot_pose.y
    r = state.robot.radius
    d, _, _ = nearest_occupied(state.map, x, y)
    best = d - r
    for p in state.pedestrians:
        best = min(best, math.hypot(x - p.position[0], y - p.position[1]) - r - p.radius)
    return max(best, 0.0)


def social_forces(state: WorldState) -> np.ndarray:
    """Per-pedestrian acceleration: goal relaxation + pairwise, wall and robot repulsion."""
    sf = state.social
    peds = state.pedestrians
    n = len(peds)
    acc = np.zeros((n, 2))
    if n == 0:
        return acc
    pos = np.array([p.position for p in peds])
    vel = np.array([p.velocity for p in peds])
    goal = np.array([p.goal for p in peds])
    radii = np.array([p.radius for p in peds])
    v_des = np.array([p.desired_speed for p in peds])

    cd, sd = math.cos(sf.robot_deflection), math.sin(sf.robot_deflection)
    to_goal = goal - pos
    dist_goal = np.hypot(to_goal[:, 0], to_goal[:, 1])
    e = np.divide(to_goal, dist_goal[:, None], out=np.zeros_like(to_goal), where=dist_goal[:, None] > 0)
    acc += (v_des[:, None] * e - vel) / sf.relaxation_time

    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            diff = pos[i] - pos[j]
            d = math.hypot(diff[0], diff[1])
            gap = d - radii[i] - radii[j]
            if d == 0.0 or gap > sf.cutoff:
                continue
            acc[i] += sf.repulsion_strength_A * math.exp(-gap / sf.repulsion_range_B) * diff / d
        d_wall, qx, qy = nearest_occupied(state.map, pos[i, 0], pos[i, 1])
        gap = d_wall - radii[i]
        if 0.0 < d_wall and gap <= sf.cutoff:
            diff = pos[i] - np.array([qx, qy])
            acc[i] += sf.wall_strength * math.exp(-gap / sf.wall_range) * diff / d_wall
        diff = pos[i] - state.robot_pose.xy
        d = math.hypot(diff[0], diff[1])
        gap = d - radii[i] - state.robot.radius
        if d > 0.0 and gap <= sf.cutoff and sf.robot_strength > 0:
            ux, uy = diff / d
            mag = sf.robot_strength * math.exp(-gap / sf.repulsion_range_B)
            acc[i] += mag * np.array([cd * ux + sd * uy, -sd * ux + cd * uy])
    return acc


def step_pedestrians(state: WorldState, dt: float) -> WorldState:
    """Semi-implicit Euler step of the social-force model with per-pedestrian speed caps."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not state.pedestrians:
        return state
    sf = state.social
    acc = social_forces(state)
    moved = []
    for p, a in zip(state.pedestrians, acc):
        vel = p.velocity + a * dt
        cap = sf.max_speed_factor * p.desired_speed
        speed = math.hypot(vel[0], vel[1])
        if speed > cap:
            vel = vel * (cap / speed)
        pos = p.position + vel * dt
        goal, origin = p.goal, p.patrol_origin
        if math.hypot(*(goal - pos)) < sf.goal_tolerance:
            goal, origin = origin, goal
        moved.append(Pedestrian(position=pos, velocity=vel, goal=goal,
                                desired_speed=p.desired_speed, radius=p.radius,
                                patrol_origin=origin))
    return state.evolve(pedestrians=tuple(moved))
