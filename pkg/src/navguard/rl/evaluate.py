"""Frozen-policy episodes: DWA alone, the neural policy, or the neural policy under the supervisor."""

from __future__ import annotations

from typing import Callable

import numpy as np

from navguard.classical.pursuit import backoff_action
from navguard.harness.metrics import EpisodeSummary, MetricsRow, action_mse_pct, aggregate_metrics
from navguard.nn.policy import PolicyBundle, forward_actor
from navguard.rl.actions import action_denormalize, action_normalize
from navguard.rl.env import NavEnv
from navguard.supervisor.fuzzy import FuzzyParams
from navguard.supervisor.switch import (BACKOFF, CRITICAL_DISTANCE, SAFE, SupervisorConfig,
                                        SupervisorState, supervise_step)

SOURCES = ("dwa", "neural", "neural+supervisor")


def run_episode(env: NavEnv, source: str, seed: int, bundle: PolicyBundle | None = None,
                params: FuzzyParams | None = None, sup_cfg: SupervisorConfig = SupervisorConfig(),
                noise_sigma: float = 0.0, noise_rng: np.random.Generator | None = None,
                on_step: Callable[[dict], None] | None = None,
                with_expert: bool = True) -> EpisodeSummary:
    """Run one complete episode. ``noise_sigma`` perturbs the neural action (normalized units).

    ``with_expert=False`` skips the per-tick DWA query (MSE is then reported as NaN).
    """
    if source not in SOURCES:
        raise ValueError(f"unknown policy source {source!r}; expected one of {SOURCES}")
    if source != "dwa" and bundle is None:
        raise ValueError(f"source {source!r} needs a policy bundle")
    supervised = source == "neural+supervisor"
    if supervised and params is None:
        params = FuzzyParams()
    rc = env.cfg.robot
    env.reset(seed)
    sup = SupervisorState()
    total = total_col = mse = 0.0
    crit = 0
    info = None
    while True:
        a_e = env.expert_normalized() if with_expert or source == "dwa" else None
        policy = source
        if source == "dwa":
            twist = env.expert().twist
        else:
            a = forward_actor(bundle, env.obs)
            if noise_sigma > 0:
                a = np.clip(a + noise_rng.normal(0.0, noise_sigma, size=2), -1.0, 1.0)
            twist = action_denormalize(a, rc.v_max, rc.w_max)
            policy = "neural"
            if supervised:
                choice, sup = supervise_step(env.clearance(), abs(env.state.robot_twist.v), params,
                                             sup, sup_cfg)
                if choice == SAFE:
                    twist = env.safe_action()
                elif choice == BACKOFF:
                    twist = backoff_action()
                policy = choice
        a_exec = action_normalize(twist, rc.v_max, rc.w_max)
        _, r, done, info = env.step(twist)
        step_mse = action_mse_pct(a_exec, a_e) if a_e is not None else float("nan")
        total += r
        total_col += info.terms.collision
        mse += step_mse
        crit += info.clearance < CRITICAL_DISTANCE
        if on_step is not None:
            rec = {"t": env.steps, "a": [float(x) for x in np.clip(a_exec, -1, 1)],
                   "a_e": None if a_e is None else [float(x) for x in a_e], "r": float(r),
                   "r_collision": float(info.terms.collision), "clearance": float(info.clearance),
                   "policy": policy, "goal_reached": bool(info.goal_reached)}
            if supervised:
                rec["mode"] = sup.mode
            on_step(rec)
        if done:
            break
    n = env.steps
    return EpisodeSummary(total_reward=total, total_r_collision=total_col, timesteps=n,
                          mse_dwa_pct=mse / n, critical_pct=100.0 * crit / n,
                          goal_reached=bool(info.goal_reached), switches=sup.switch_count,
                          criticals=sup.critical_count)


def evaluate_policy(env: NavEnv, source: str, n_steps: int = 10_000, seed: int = 0,
                    bundle: PolicyBundle | None = None, params: FuzzyParams | None = None,
                    sup_cfg: SupervisorConfig = SupervisorConfig(),
                    on_episode: Callable[[int, EpisodeSummary], None] | None = None,
                    on_step: Callable[[dict], None] | None = None,
                    label: str = "") -> tuple[MetricsRow, list[EpisodeSummary]]:
    """Complete episodes with zero exploration noise until at least ``n_steps`` ticks elapsed."""
    rng = np.random.default_rng(seed)
    episodes: list[EpisodeSummary] = []
    elapsed = 0
    while elapsed < n_steps or len(episodes) < 2:
        ep_seed = int(rng.integers(2**31 - 1))
        ep = run_episode(env, source, ep_seed, bundle, params, sup_cfg, on_step=on_step)
        episodes.append(ep)
        elapsed += ep.timesteps
        if on_episode is not None:
            on_episode(len(episodes) - 1, ep)
    return aggregate_metrics(episodes, label=label or source), episodes
