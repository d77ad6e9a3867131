"""Navigation episodes: the world plus global planning, waypoint tracking, reward and expert queries."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from navguard.classical.astar import (GlobalPath, NoPath, extract_waypoint, extract_waypoint_index,
                                      nearest_index, plan_global)
from navguard.classical.dwa import DwaConfig, ExpertAction, dwa_action, recovery_twist
from navguard.classical.pursuit import pure_pursuit_action
from navguard.rl.actions import action_normalize
from navguard.rl.reward import RewardConfig, RewardTerms, reward_terms
from navguard.sensing import (LidarScan, Observation, SensingConfig, assemble_observation, raycast_scan,
                              to_robot_frame)
from navguard.world.scenario import InvalidScenario, Scenario, reset_episode
from navguard.world.sim import distance_to_nearest_obstacle, step_pedestrians, step_robot
from navguard.world.state import RobotConfig, SocialForceParams, Twist, WorldState


@dataclass(frozen=True)
class PlannerConfig:
    lookahead: float = 2.0
    safe_lookahead: float = 0.3
    safe_speed: float = 0.5
    replan_every: int = 20
    stray_distance: float = 1.0
    inflation_margin: float = 0.55
    # the expert steers toward a path point this far ahead; None uses the policy's waypoint
    expert_lookahead: float | None = 1.0
    dwa: DwaConfig = field(default_factory=DwaConfig)


@dataclass(frozen=True)
class EnvConfig:
    robot: RobotConfig = field(default_factory=RobotConfig)
    social: SocialForceParams = field(default_factory=SocialForceParams)
    sensing: SensingConfig = field(default_factory=SensingConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    dt: float = 0.1


@dataclass
class StepInfo:
    terms: RewardTerms
    clearance: float
    collision: bool
    goal_reached: bool
    truncated: bool
    cmd: Twist


class NavEnv:
    """One robot, one scenario. ``reset`` then ``step`` until ``done``.

    The expert's recommendation for the current state is available through
    :meth:`expert` before each call to :meth:`step`.
    """

    def __init__(self, scenario: Scenario, cfg: EnvConfig = EnvConfig(), horizon: int | None = None):
        self.scenario = scenario
        self._horizon = horizon
        self.cfg = cfg
        base = scenario.load_map()
        self.map = replace(base, inflation_radius=cfg.robot.radius + cfg.planner.inflation_margin)
        self.state: WorldState | None = None
        self.path: GlobalPath | None = None
        self.waypoint: np.ndarray | None = None
        self.scan: LidarScan | None = None
        self.obs: Observation | None = None
        self.steps = 0
        self._since_replan = 0
        self._expert: ExpertAction | None = None

    # -- episode control -------------------------------------------------

    def reset(self, seed: int) -> Observation:
        for attempt in range(20):
            state = reset_episode(self.scenario, seed * 1009 + attempt, robot=self.cfg.robot,
                                  social=self.cfg.social, occ_map=self.map)
            try:
                self.path = plan_global(self.map, state.robot_pose.xy, state.goal)
                break
            except NoPath:
                continue
        else:
            raise InvalidScenario(f"no plannable start/goal pair for seed {seed}")
        self.state = state
        self.steps = 0
        self._since_replan = 0
        self.waypoint = extract_waypoint(self.path, state.robot_pose, self.cfg.planner.lookahead)
        self._observe()
        return self.obs

    def _observe(self):
        s = self.cfg.sensing
        self.scan = raycast_scan(self.state, s.n_rays, s.max_range)
        p = self.cfg.planner
        self.carrot = self.waypoint if p.expert_lookahead is None else \
            extract_waypoint(self.path, self.state.robot_pose, p.expert_lookahead)
        self.obs = assemble_observation(self.state, self.scan, self.waypoint, s, self.carrot)
        self._expert = None

    @property
    def goal(self) -> np.ndarray:
        return self.state.goal

    @property
    def horizon(self) -> int:
        return self._horizon or self.scenario.horizon_steps

    def clearance(self) -> float:
        return distance_to_nearest_obstacle(self.state)

    # -- expert / fallback queries ----------------------------------------

    def expert(self) -> ExpertAction:
        if self._expert is None:
            dwa = self.cfg.planner.dwa
            ex = dwa_action(self.state, self.scan, self.carrot, dwa)
            if not ex.feasible:
                # boxed in: turn in place instead of freezing against the obstacle
                rel = to_robot_frame(self.state.robot_pose, self.carrot)
                ex = ExpertAction(recovery_twist(self.scan, rel, dwa), feasible=False)
            self._expert = ex
        return self._expert

    def expert_normalized(self) -> np.ndarray:
        rc = self.cfg.robot
        return action_normalize(self.expert().twist, rc.v_max, rc.w_max, clip=True)

    def safe_action(self) -> Twist:
        p = self.cfg.planner
        target = extract_waypoint(self.path, self.state.robot_pose, p.safe_lookahead)
        if math.hypot(target[0] - self.state.robot_pose.x, target[1] - self.state.robot_pose.y) < 1e-9:
            return Twist(0.0, 0.0)
        return pure_pursuit_action(self.state.robot_pose, target, p.safe_speed, self.cfg.robot.w_max)

    # -- stepping -----------------------------------------------------------

    def step(self, cmd: Twist) -> tuple[Observation, float, bool, StepInfo]:
        if self.state is None:
            raise RuntimeError("reset() must be called before step()")
        prev = self.state
        rc = self.cfg.robot
        cmd = cmd.clamped(rc.v_max, rc.w_max)
        nxt = step_robot(prev, cmd, self.cfg.dt)
        nxt = step_pedestrians(nxt, self.cfg.dt)
        clearance = distance_to_nearest_obstacle(nxt)
        terms = reward_terms(prev, cmd, nxt, self.waypoint, self.cfg.reward, clearance)
        self.state = nxt
        self.steps += 1
        goal_reached = self._update_waypoint(terms.reached)
        truncated = not goal_reached and self.steps >= self.horizon
        self._observe()
        info = StepInfo(terms=terms, clearance=clearance, collision=nxt.collision,
                        goal_reached=goal_reached, truncated=truncated, cmd=cmd)
        return self.obs, terms.total, goal_reached or truncated, info

    def _update_waypoint(self, reached: bool) -> bool:
        pose = self.state.robot_pose
        p = self.cfg.planner
        margin = self.cfg.reward.waypoint_margin
        goal = self.state.goal
        if math.hypot(goal[0] - pose.x, goal[1] - pose.y) < margin:
            return True
        self._since_replan += 1
        k_robot = nearest_index(self.path, pose.x, pose.y)
        off_path = math.hypot(*(self.path.waypoints[k_robot] - pose.xy)) > p.stray_distance
        if self._since_replan >= p.replan_every or off_path:
            try:
                self.path = plan_global(self.map, pose.xy, goal, snap_start=True)
            except NoPath:
                pass
            self._since_replan = 0
            k_robot = nearest_index(self.path, pose.x, pose.y)
            k_wp = nearest_index(self.path, *self.waypoint)
            if math.hypot(*(self.path.waypoints[k_wp] - self.waypoint)) > 0.5:
                reached = True  # old waypoint no longer on the plan
        else:
            k_wp = nearest_index(self.path, *self.waypoint)
        if reached or k_robot > k_wp:
            self.waypoint = self.path.waypoints[extract_waypoint_index(self.path, pose, p.lookahead)].copy()
        return False
