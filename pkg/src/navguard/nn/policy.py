"""The trainable bundle (actor, twin critics, their targets, optimizers) and observation features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from navguard.nn.network import Network, NetworkSpec
from navguard.nn.optim import Adam, AdamConfig


@dataclass(frozen=True)
class FeatureSpec:
    """How an Observation is turned into network inputs."""
    mode: str = "rays"
    n_sectors: int = 64
    image_side: int = 60
    v_max: float = 1.0
    w_max: float = 2.0
    waypoint_scale: float = 2.0
    # append the expert's path carrot (robot frame, scaled by carrot_scale) to the vector input
    carrot: bool = True
    carrot_scale: float = 1.0

    def __post_init__(self):
        if self.mode not in ("rays", "costmap"):
            raise ValueError(f"unknown feature mode {self.mode!r}")

    @property
    def vec_dim(self) -> int:
        return (self.n_sectors if self.mode == "rays" else 0) + 4 + (2 if self.carrot else 0)

    @property
    def uses_image(self) -> bool:
        return self.mode == "costmap"


def featurize(obs, fs: FeatureSpec):
    """Observation -> (vector features float32 (D,), image float32 (S, S) or None)."""
    wp = np.clip(np.asarray(obs.waypoint_rel) / fs.waypoint_scale, -3.0, 3.0)
    head = [obs.velocity.v / fs.v_max, obs.velocity.w / fs.w_max, wp[0], wp[1]]
    if fs.carrot:
        if obs.carrot_rel is None:
            raise ValueError("observation lacks the path carrot")
        c = np.clip(np.asarray(obs.carrot_rel) / fs.carrot_scale, -3.0, 3.0)
        head += [c[0], c[1]]
    if fs.mode == "rays":
        if obs.rays is None or len(obs.rays) != fs.n_sectors:
            raise ValueError("observation lacks the expected ray features")
        vec = np.concatenate([obs.rays, head])
        img = None
    else:
        if obs.costmap is None:
            raise ValueError("observation lacks a costmap")
        vec = np.asarray(head, dtype=np.float64)
        img = obs.costmap.values.astype(np.float32)
    return vec.astype(np.float32), img


@dataclass
class PolicyBundle:
    actor: Network
    critic1: Network
    critic2: Network
    actor_target: Network
    critic1_target: Network
    critic2_target: Network
    opt_actor: Adam
    opt_critic1: Adam
    opt_critic2: Adam
    features: FeatureSpec
    adam: AdamConfig

    @property
    def networks(self) -> list[Network]:
        """Declaration order used by checkpoints."""
        return [self.actor, self.critic1, self.critic2,
                self.actor_target, self.critic1_target, self.critic2_target]

    @property
    def optimizers(self) -> list[Adam]:
        return [self.opt_actor, self.opt_critic1, self.opt_critic2]

    def snapshot(self) -> "PolicyBundle":
        """Deep copy (read-only use by evaluation workers)."""
        return PolicyBundle(*[n.copy() for n in self.networks],
                            *[o.copy() for o in self.optimizers],
                            features=self.features, adam=self.adam)


def make_bundle(features: FeatureSpec = FeatureSpec(), trunk=(256, 256), conv=(),
                adam: AdamConfig = AdamConfig(), seed: int = 0) -> PolicyBundle:
    rng = np.random.default_rng(seed)
    side = features.image_side if features.uses_image else 0
    conv = tuple(conv) if features.uses_image else ()
    a_spec = NetworkSpec("actor", features.vec_dim, side, conv, tuple(trunk))
    c_spec = NetworkSpec("critic", features.vec_dim, side, conv, tuple(trunk))
    actor = Network(a_spec, rng)
    c1 = Network(c_spec, rng)
    c2 = Network(c_spec, rng)
    return PolicyBundle(actor, c1, c2, actor.copy(), c1.copy(), c2.copy(),
                        Adam(actor.params, adam), Adam(c1.params, adam), Adam(c2.params, adam),
                        features=features, adam=adam)


def forward_actor(bundle: PolicyBundle, obs) -> np.ndarray:
    """Deterministic normalized action in (-1, 1)^2 for one observation."""
    vec, img = featurize(obs, bundle.features)
    out = bundle.actor(vec[None], None if img is None else img[None])
    return out[0].astype(np.float64)


def forward_critic(bundle: PolicyBundle, obs, action, which: int = 1) -> float:
    vec, img = featurize(obs, bundle.features)
    net = bundle.critic1 if which == 1 else bundle.critic2
    a = np.asarray(action, dtype=np.float32).reshape(1, -1)
    return float(net(vec[None], None if img is None else img[None], a)[0, 0])

