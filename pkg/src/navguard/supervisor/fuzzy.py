"""Speed-dependent supervisor radius from two Gaussian fuzzy rules.

Rules: slow -> small radius, fast -> big radius. Consequent sets are Gaussians
centred at 0 m and 1.3 m; with product implication and sum aggregation the
centroid reduces to a firing-strength times spread weighted mean of the two
centres.
"""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass

import numpy as np

CENTER_V_LOW = 0.0
CENTER_V_HIGH = 1.5
CENTER_R_SMALL = 0.0
CENTER_R_BIG = 1.3
SIGMA_BOUNDS = (0.05, 3.0)


@dataclass(frozen=True)
class FuzzyParams:
    sigma_v_low: float = 0.5
    sigma_v_high: float = 0.5
    sigma_r_small: float = 0.5
    sigma_r_big: float = 0.5

    def __post_init__(self):
        lo, hi = SIGMA_BOUNDS
        for name, s in zip(("sigma_v_low", "sigma_v_high", "sigma_r_small", "sigma_r_big"), astuple(self)):
            if not (lo <= s <= hi):
                raise ValueError(f"{name}={s} outside [{lo}, {hi}]")

    def genome(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)

    @classmethod
    def from_genome(cls, g) -> "FuzzyParams":
        g = np.clip(np.asarray(g, dtype=np.float64), *SIGMA_BOUNDS)
        return cls(*(float(x) for x in g))


# a genome is the four sigmas, in FuzzyParams field order
Genome = np.ndarray


def gaussian(x: float, center: float, sigma: float) -> float:
    return math.exp(-((x - center) ** 2) / (2.0 * sigma * sigma))


def memberships(v: float, p: FuzzyParams) -> tuple[float, float]:
    v = abs(v)
    return gaussian(v, CENTER_V_LOW, p.sigma_v_low), gaussian(v, CENTER_V_HIGH, p.sigma_v_high)


def fuzzy_radius(v: float, p: FuzzyParams) -> float:
    """Supervisor radius (m) for linear speed ``v`` (|v| is used)."""
    mu_low, mu_high = memberships(v, p)
    w_small = mu_low * p.sigma_r_small
    w_big = mu_high * p.sigma_r_big
    total = w_small + w_big
    if total <= 0.0:
        # both rules underflowed: fall back to the nearer speed centre
        return CENTER_R_BIG if abs(v) > 0.5 * (CENTER_V_LOW + CENTER_V_HIGH) else CENTER_R_SMALL
    return CENTER_R_SMALL + (CENTER_R_BIG - CENTER_R_SMALL) * (w_big / total)
