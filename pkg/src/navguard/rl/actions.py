"""Affine maps between normalized actions in [-1, 1]^2 and robot twists."""

from __future__ import annotations

import numpy as np

from navguard.world.state import Twist


def action_denormalize(a, v_max: float, w_max: float) -> Twist:
    """(-1, -1) -> (0, -w_max); (1, 1) -> (v_max, w_max)."""
    return Twist(float((a[0] + 1.0) * 0.5 * v_max), float(a[1] * w_max))


def action_normalize(twist: Twist, v_max: float, w_max: float, clip: bool = False) -> np.ndarray:
    a = np.array([2.0 * twist.v / v_max - 1.0, twist.w / w_max])
    return np.clip(a, -1.0, 1.0) if clip else a
