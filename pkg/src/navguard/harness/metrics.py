"""Per-episode summaries and their aggregation into per-algorithm rows (mean and 95% CI)."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

METRIC_FIELDS = ("total_reward", "total_r_collision", "timesteps", "mse_dwa_pct", "critical_pct")


class InsufficientData(ValueError):
    pass


@dataclass
class EpisodeSummary:
    total_reward: float
    total_r_collision: float
    timesteps: int
    mse_dwa_pct: float
    critical_pct: float
    goal_reached: bool = False
    switches: int = 0
    criticals: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Stat:
    mean: float
    ci95: float

    def __str__(self) -> str:
        return f"{self.mean:.3f} +/- {self.ci95:.3f}"


@dataclass(frozen=True)
class MetricsRow:
    total_reward: Stat
    total_r_collision: Stat
    timesteps_mean: Stat
    mse_dwa_pct: Stat
    critical_pct: Stat
    n_episodes: int
    label: str = ""

    def flat(self) -> dict:
        out = {"label": self.label, "n_episodes": self.n_episodes}
        for name in ("total_reward", "total_r_collision", "timesteps_mean", "mse_dwa_pct", "critical_pct"):
            s = getattr(self, name)
            out[name] = s.mean
            out[name + "_ci95"] = s.ci95
        return out


def mean_ci(values, confidence: float = 0.95) -> Stat:
    """Mean and Student-t confidence half-width of per-episode values."""
    x = np.asarray(values, dtype=np.float64)
    n = x.size
    if n < 2:
        raise InsufficientData(f"need at least 2 episodes, got {n}")
    sd = float(np.std(x, ddof=1))
    half = float(stats.t.ppf(0.5 + confidence / 2.0, n - 1)) * sd / math.sqrt(n)
    return Stat(float(np.mean(x)), half)


def _get(ep, key):
    return ep[key] if isinstance(ep, dict) else getattr(ep, key)


def aggregate_metrics(episodes, label: str = "") -> MetricsRow:
    """Fold per-episode summaries (objects or dicts) into a MetricsRow."""
    episodes = list(episodes)
    if len(episodes) < 2:
        raise InsufficientData(f"need at least 2 episodes, got {len(episodes)}")
    col = {k: [_get(ep, k) for ep in episodes] for k in METRIC_FIELDS}
    return MetricsRow(total_reward=mean_ci(col["total_reward"]),
                      total_r_collision=mean_ci(col["total_r_collision"]),
                      timesteps_mean=mean_ci(col["timesteps"]),
                      mse_dwa_pct=mean_ci(col["mse_dwa_pct"]),
                      critical_pct=mean_ci(col["critical_pct"]),
                      n_episodes=len(episodes), label=label)


def summarize_steps(steps) -> EpisodeSummary:
    """Rebuild an episode summary from its per-step log records."""
    steps = list(steps)
    n = len(steps)
    if n == 0:
        raise InsufficientData("episode has no steps")
    r = sum(float(s["r"]) for s in steps)
    rc = sum(float(s["r_collision"]) for s in steps)
    mse = sum(action_mse_pct(s["a"], s["a_e"]) if s.get("a_e") is not None else float("nan")
              for s in steps) / n
    crit = 100.0 * sum(1 for s in steps if s["clearance"] < 0.3) / n
    # supervisor planner mode per tick; every episode starts on the neural policy
    modes = ["neural"] + [s.get("mode", "neural") for s in steps]
    switches = sum(1 for a, b in zip(modes, modes[1:]) if a != b)
    return EpisodeSummary(r, rc, n, mse, crit, bool(steps[-1].get("goal_reached", False)),
                          switches, sum(1 for s in steps if s.get("policy") == "backoff"))


def action_mse_pct(a, a_e) -> float:
    """Mean squared difference of two normalized actions as % of its maximum (4.0)."""
    d = np.clip(np.asarray(a, dtype=np.float64), -1, 1) - np.clip(np.asarray(a_e, dtype=np.float64), -1, 1)
    return float(100.0 * np.mean(d * d) / 4.0)
