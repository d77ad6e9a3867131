"""Adam, target-network blending, and the combined backward + update step."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from navguard.nn.layers import ShapeMismatch
from navguard.nn.network import Network, Tape


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("Adam lr must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if not self.eps > 0:
            raise ValueError("Adam eps must be positive")


class Adam:
    def __init__(self, params: list[np.ndarray], cfg: AdamConfig = AdamConfig()):
        self.cfg = cfg
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if len(grads) != len(params) or len(params) != len(self.m):
            raise ShapeMismatch("gradient list does not match the parameter list")
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1 ** self.t
        bc2 = 1.0 - c.beta2 ** self.t
        step = c.lr * np.sqrt(bc2) / bc1
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if g.shape != p.shape:
                raise ShapeMismatch(f"gradient shape {g.shape} != parameter shape {p.shape}")
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * (g * g)
            p -= (step * m / (np.sqrt(v) + c.eps)).astype(p.dtype, copy=False)

    def copy(self) -> "Adam":
        clone = object.__new__(Adam)
        clone.cfg = self.cfg
        clone.m = [a.copy() for a in self.m]
        clone.v = [a.copy() for a in self.v]
        clone.t = self.t
        return clone


def backward_and_step(net: Network, opt: Adam, tape: Tape, gy) -> dict:
    """Backpropagate ``gy`` (dLoss/dOutput) through ``net`` and apply one Adam step.

    Returns the input gradients from :meth:`Network.backward`.
    """
    if np.shape(gy) != tape.out_shape:
        raise ShapeMismatch(f"loss gradient {np.shape(gy)} does not match output {tape.out_shape}")
    grads, inputs = net.backward(tape, gy)
    opt.step(net.params, grads)
    return inputs


def soft_update(target: Network, online: Network, tau: float) -> None:
    """target <- tau * online + (1 - tau) * target, in place."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    for t, o in zip(target.params, online.params):
        if t.shape != o.shape:
            raise ShapeMismatch("target and online networks differ in shape")
        if tau == 1.0:
            t[...] = o
        elif tau > 0.0:
            t *= (1.0 - tau)
            t += tau * o
