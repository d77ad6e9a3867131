"""Training loop: buffer warmup (noisy expert or random actions), then TD3 updates every tick."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from navguard.harness.metrics import action_mse_pct
from navguard.nn.optim import AdamConfig
from navguard.nn.policy import FeatureSpec, PolicyBundle, featurize, make_bundle
from navguard.rl.actions import action_denormalize
from navguard.rl.buffer import ReplayBuffer, Transition
from navguard.rl.env import NavEnv
from navguard.rl.td3 import ConfigError, TD3Config, TD3Learner
from navguard.supervisor.switch import CRITICAL_DISTANCE

CURVE_COLUMNS = ("episode", "steps", "total_reward", "total_r_collision", "mse_dwa_pct",
                 "critical_pct", "phase")


@dataclass
class EpisodeRecord:
    episode: int
    steps: int  # global step count when the episode ended
    total_reward: float
    total_r_collision: float
    mse_dwa_pct: float
    critical_pct: float
    phase: str  # "seed" (buffer warmup) or "learn"
    length: int = 0

    def row(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k in CURVE_COLUMNS}


@dataclass
class TrainResult:
    bundle: PolicyBundle
    curve: list[EpisodeRecord]
    critic_updates: int
    actor_updates: int
    warmup_steps: int
    buffer: ReplayBuffer | None = field(default=None, repr=False)


def features_for(env: NavEnv) -> FeatureSpec:
    s = env.cfg.sensing
    return FeatureSpec(mode=s.mode, n_sectors=s.n_sectors, image_side=s.cells_per_side,
                       v_max=env.cfg.robot.v_max, w_max=env.cfg.robot.w_max,
                       waypoint_scale=env.cfg.planner.lookahead,
                       carrot_scale=env.cfg.planner.expert_lookahead or env.cfg.planner.lookahead)


class _Episode:
    def __init__(self):
        self.reward = 0.0
        self.collision = 0.0
        self.mse = 0.0
        self.critical = 0
        self.n = 0

    def add(self, r, r_col, a, a_e, clearance):
        self.reward += r
        self.collision += r_col
        self.mse += action_mse_pct(a, a_e)
        self.critical += clearance < CRITICAL_DISTANCE
        self.n += 1

    def record(self, episode, steps, phase) -> EpisodeRecord:
        n = max(self.n, 1)
        return EpisodeRecord(episode, steps, self.reward, self.collision, self.mse / n,
                             100.0 * self.critical / n, phase, self.n)


def seed_buffer(env: NavEnv, buffer: ReplayBuffer, sigma: float, seed_steps: int,
                rng: np.random.Generator, episode_seeds, fs: FeatureSpec | None = None,
                mode: str = "expert", on_episode: Callable[[EpisodeRecord], None] | None = None,
                start_episode: int = 0) -> list[EpisodeRecord]:
    """Fill ``buffer`` with exactly ``seed_steps`` transitions.

    ``mode="expert"`` acts with clip(a_e + N(0, sigma)); ``mode="random"`` acts uniformly.
    Every transition stores the expert action a_e either way.
    """
    if len(buffer) != 0:
        raise ValueError("seed_buffer expects an empty buffer")
    fs = fs or features_for(env)
    rc = env.cfg.robot
    records = []
    if seed_steps == 0:
        return records
    env.reset(next(episode_seeds))
    ep = _Episode()
    for t in range(seed_steps):
        vec, img = featurize(env.obs, fs)
        a_e = env.expert_normalized()
        if mode == "expert":
            a = np.clip(a_e + rng.normal(0.0, sigma, size=2), -1.0, 1.0)
        else:
            a = rng.uniform(-1.0, 1.0, size=2)
        obs2, r, done, info = env.step(action_denormalize(a, rc.v_max, rc.w_max))
        vec2, img2 = featurize(obs2, fs)
        buffer.add(Transition(vec, a, a_e, r, vec2, info.goal_reached, img, img2))
        ep.add(r, info.terms.collision, a, a_e, info.clearance)
        last = t == seed_steps - 1
        if done or last:
            rec = ep.record(start_episode + len(records), t + 1, "seed")
            records.append(rec)
            if on_episode:
                on_episode(rec)
            ep = _Episode()
            if not last:
                env.reset(next(episode_seeds))
    return records


def _seed_stream(rng: np.random.Generator):
    while True:
        yield int(rng.integers(2**31 - 1))


def train(env: NavEnv, cfg: TD3Config, seed: int, trunk=(256, 256), conv=(),
          adam: AdamConfig = AdamConfig(), on_episode: Callable[[EpisodeRecord], None] | None = None,
          keep_buffer: bool = False) -> TrainResult:
    """Warm up the buffer, then run ``cfg.total_steps`` learning ticks.

    Expert-regularized TD3 is ``cfg`` as given; plain TD3 is ``TD3Config.plain(...)``
    (lambda 0 and a random-action warmup of the same length). Deterministic given ``seed``.
    """
    if not isinstance(cfg, TD3Config):
        raise ConfigError("cfg must be a TD3Config")
    fs = features_for(env)
    init_ss, explore_ss, sample_ss, target_ss, episode_ss = np.random.SeedSequence(seed).spawn(5)
    bundle = make_bundle(fs, trunk=trunk, conv=conv, adam=adam,
                         seed=int(init_ss.generate_state(1)[0]))
    explore = np.random.default_rng(explore_ss)
    sampler = np.random.default_rng(sample_ss)
    episode_seeds = _seed_stream(np.random.default_rng(episode_ss))
    buffer = ReplayBuffer(cfg.buffer_capacity, fs.vec_dim, 2, fs.image_side if fs.uses_image else 0)
    learner = TD3Learner(bundle, cfg, np.random.default_rng(target_ss))
    rc = env.cfg.robot

    curve = seed_buffer(env, buffer, cfg.sigma_explore, cfg.seed_steps, explore, episode_seeds, fs,
                        mode=cfg.warmup, on_episode=on_episode)
    n_seed = cfg.seed_steps
    if cfg.total_steps:
        env.reset(next(episode_seeds))
    ep = _Episode()
    for t in range(cfg.total_steps):
        vec, img = featurize(env.obs, fs)
        a_e = env.expert_normalized()
        pi = bundle.actor(vec[None], None if img is None else img[None])[0].astype(np.float64)
        a = np.clip(pi + explore.normal(0.0, cfg.sigma_explore, size=2), -1.0, 1.0)
        obs2, r, done, info = env.step(action_denormalize(a, rc.v_max, rc.w_max))
        vec2, img2 = featurize(obs2, fs)
        # horizon truncation is not terminal: only reaching the goal stops bootstrapping
        buffer.add(Transition(vec, a, a_e, r, vec2, info.goal_reached, img, img2))
        if len(buffer) >= cfg.batch_N:
            learner.update(buffer.sample(cfg.batch_N, sampler))
        ep.add(r, info.terms.collision, a, a_e, info.clearance)
        if done:
            rec = ep.record(len(curve), n_seed + t + 1, "learn")
            curve.append(rec)
            if on_episode:
                on_episode(rec)
            ep = _Episode()
            env.reset(next(episode_seeds))
    return TrainResult(bundle, curve, learner.critic_updates, learner.actor_updates, n_seed,
                       buffer if keep_buffer else None)


def curve_auc(curve: list[EpisodeRecord], first_steps: int, phase: str = "learn") -> float:
    """Step-weighted area under the episode-reward curve over the first ``first_steps`` ticks
    of ``phase``, divided by the number of ticks covered (the mean per-tick episode reward level).
    """
    covered = 0
    area = 0.0
    for rec in curve:
        if rec.phase != phase:
            continue
        w = min(rec.length, first_steps - covered)
        if w <= 0:
            break
        area += w * rec.total_reward
        covered += w
    if covered == 0:
        raise ValueError(f"no completed {phase!r} episodes in the curve")
    return area / covered
