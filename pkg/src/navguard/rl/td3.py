"""Twin-delayed actor-critic updates, with an optional pull of the actor toward expert actions."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from navguard.nn.optim import backward_and_step, soft_update
from navguard.nn.policy import PolicyBundle
from navguard.rl.buffer import Batch


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TD3Config:
    gamma: float = 0.99
    tau_soft: float = 0.005
    sigma_explore: float = 0.1
    sigma_target: float = 0.2
    clip_c: float = 0.5
    policy_delay: int = 2
    batch_N: int = 256
    lambda_reg: float = 1.0
    seed_steps: int = 5000
    total_steps: int = 30000
    horizon_steps: int = 400
    buffer_capacity: int = 200_000
    # what fills the buffer before learning: "expert" (noisy DWA) or "random" (uniform actions)
    warmup: str = "expert"
    # rewards are multiplied by this before entering the Bellman target (learner-side only)
    reward_scale: float = 1.0

    def __post_init__(self):
        errors = []
        if not 0 < self.gamma <= 1:
            errors.append("gamma must lie in (0, 1]")
        if not 0 <= self.tau_soft <= 1:
            errors.append("tau_soft must lie in [0, 1]")
        if self.sigma_explore < 0 or self.sigma_target < 0:
            errors.append("noise scales must be >= 0")
        if not self.clip_c > 0:
            errors.append("clip_c must be > 0")
        if self.policy_delay < 1:
            errors.append("policy_delay must be >= 1")
        if self.batch_N < 1:
            errors.append("batch_N must be >= 1")
        if self.lambda_reg < 0:
            errors.append("lambda_reg must be >= 0")
        if self.seed_steps < 0 or self.total_steps < 0 or self.horizon_steps < 1:
            errors.append("step budgets must be non-negative (horizon >= 1)")
        if self.buffer_capacity < 1:
            errors.append("buffer_capacity must be >= 1")
        if not self.reward_scale > 0:
            errors.append("reward_scale must be > 0")
        if self.warmup not in ("expert", "random"):
            errors.append("warmup must be 'expert' or 'random'")
        if errors:
            raise ConfigError("; ".join(errors))

    @classmethod
    def plain(cls, **kw) -> "TD3Config":
        """Plain TD3 ablation: no expert pull, random-action warmup."""
        return cls(**{**kw, "lambda_reg": 0.0, "warmup": "random"})

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def target_noise(rng: np.random.Generator, shape, sigma: float, c: float) -> np.ndarray:
    return np.clip(rng.normal(0.0, sigma, size=shape), -c, c).astype(np.float32)


def td3_target(batch: Batch, bundle: PolicyBundle, cfg: TD3Config, rng: np.random.Generator,
               noise: np.ndarray | None = None) -> np.ndarray:
    """y = r + gamma (1 - done) min_i Q'_i(s', clip(pi'(s') + eps, -1, 1))."""
    a2 = bundle.actor_target(batch.s2, batch.img2)
    if noise is None:
        noise = target_noise(rng, a2.shape, cfg.sigma_target, cfg.clip_c)
    a2 = np.clip(a2 + noise, -1.0, 1.0)
    q1 = bundle.critic1_target(batch.s2, batch.img2, a2)
    q2 = bundle.critic2_target(batch.s2, batch.img2, a2)
    return cfg.reward_scale * batch.r + cfg.gamma * (1.0 - batch.done) * np.minimum(q1, q2)


def update_critics(batch: Batch, y: np.ndarray, bundle: PolicyBundle) -> tuple[float, float]:
    """One Adam step per critic on the mean squared Bellman error."""
    n = len(batch)
    losses = []
    for net, opt in ((bundle.critic1, bundle.opt_critic1), (bundle.critic2, bundle.opt_critic2)):
        q, tape = net.forward(batch.s, batch.img, batch.a)
        err = q - y
        losses.append(float(np.mean(err * err)))
        backward_and_step(net, opt, tape, (2.0 / n) * err)
    return losses[0], losses[1]


def soft_update_targets(bundle: PolicyBundle, tau: float) -> None:
    soft_update(bundle.actor_target, bundle.actor, tau)
    soft_update(bundle.critic1_target, bundle.critic1, tau)
    soft_update(bundle.critic2_target, bundle.critic2, tau)


def actor_gradient(batch: Batch, bundle: PolicyBundle, lam: float):
    """Loss (1/N) sum [-Q1(s, pi(s)) + lam * mean_k (pi_k(s) - a_e,k)^2] and dLoss/dpi.

    Returns (loss, actor tape, gradient w.r.t. the actor output).
    """
    n = len(batch)
    pi, tape = bundle.actor.forward(batch.s, batch.img)
    q, ctape = bundle.critic1.forward(batch.s, batch.img, pi)
    _, inputs = bundle.critic1.backward(ctape, np.ones_like(q))
    diff = pi - batch.a_e
    k = pi.shape[1]
    loss = float(np.mean(-q) + lam * np.mean(np.sum(diff * diff, axis=1) / k))
    # d/dpi of lam * (1/k) sum (pi - a_e)^2 is (2 lam / k)(pi - a_e) = lam (pi - a_e) for k = 2
    g = (-inputs["action"] + (2.0 * lam / k) * diff) / n
    return loss, tape, g


def update_actor_regularized(batch: Batch, bundle: PolicyBundle, cfg: TD3Config) -> float:
    """Delayed actor step toward high Q and the expert action, then blend all targets."""
    loss, tape, g = actor_gradient(batch, bundle, cfg.lambda_reg)
    backward_and_step(bundle.actor, bundle.opt_actor, tape, g)
    soft_update_targets(bundle, cfg.tau_soft)
    return loss


class TD3Learner:
    """Owns the update schedule: critics every call, actor and targets every ``policy_delay``."""

    def __init__(self, bundle: PolicyBundle, cfg: TD3Config, rng: np.random.Generator):
        self.bundle = bundle
        self.cfg = cfg
        self.rng = rng
        self.critic_updates = 0
        self.actor_updates = 0

    def update(self, batch: Batch) -> dict:
        y = td3_target(batch, self.bundle, self.cfg, self.rng)
        l1, l2 = update_critics(batch, y, self.bundle)
        self.critic_updates += 1
        out = {"critic1_loss": l1, "critic2_loss": l2}
        if self.critic_updates % self.cfg.policy_delay == 0:
            out["actor_loss"] = update_actor_regularized(batch, self.bundle, self.cfg)
            self.actor_updates += 1
        return out


# ---------------------------------------------------------------------------
# reference: textbook TD3 without any expert term, kept separate on purpose so the
# regularized path with lambda = 0 can be checked against it

def reference_td3_update(bundle: PolicyBundle, batch: Batch, cfg: TD3Config,
                         rng: np.random.Generator, iteration: int) -> None:
    """Plain TD3 step; ``iteration`` counts critic updates starting at 1."""
    a_next = bundle.actor_target(batch.s2, batch.img2)
    eps = np.clip(rng.normal(0.0, cfg.sigma_target, size=a_next.shape), -cfg.clip_c, cfg.clip_c)
    a_next = np.clip(a_next + eps.astype(np.float32), -1.0, 1.0)
    q_next = np.minimum(bundle.critic1_target(batch.s2, batch.img2, a_next),
                        bundle.critic2_target(batch.s2, batch.img2, a_next))
    y = cfg.reward_scale * batch.r + cfg.gamma * (1.0 - batch.done) * q_next
    n = len(batch)
    for net, opt in ((bundle.critic1, bundle.opt_critic1), (bundle.critic2, bundle.opt_critic2)):
        q, tape = net.forward(batch.s, batch.img, batch.a)
        grads, _ = net.backward(tape, (2.0 / n) * (q - y))
        opt.step(net.params, grads)
    if iteration % cfg.policy_delay:
        return
    pi, tape = bundle.actor.forward(batch.s, batch.img)
    q, ctape = bundle.critic1.forward(batch.s, batch.img, pi)
    _, dq = bundle.critic1.backward(ctape, np.ones_like(q))
    grads, _ = bundle.actor.backward(tape, -dq["action"] / n)
    bundle.opt_actor.step(bundle.actor.params, grads)
    for tgt, src in ((bundle.actor_target, bundle.actor), (bundle.critic1_target, bundle.critic1),
                     (bundle.critic2_target, bundle.critic2)):
        soft_update(tgt, src, cfg.tau_soft)
