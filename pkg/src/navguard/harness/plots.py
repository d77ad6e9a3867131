"""Tidy CSV exports for plotting: training curves and evolution statistics."""

from __future__ import annotations

import csv
import io

import numpy as np

from navguard.rl.train import CURVE_COLUMNS

ROLLING_WINDOW = 50
EVOLUTION_COLUMNS = ("generation", "switches_mean", "switches_std", "criticals_mean",
                     "criticals_std")


def rolling_mean(values, window: int = ROLLING_WINDOW) -> np.ndarray:
    """Trailing mean over the last ``window`` values (fewer at the start of the series)."""
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        return x
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def export_plot_data(curves: dict, window: int = ROLLING_WINDOW) -> str:
    """Training curves keyed by algorithm label -> one CSV row per episode.

    Each curve is a list of EpisodeRecord (or dicts with the curve columns).
    """
    cols = ("algorithm",) + CURVE_COLUMNS + ("total_reward_rolling",)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for label, curve in curves.items():
        rows = [r if isinstance(r, dict) else r.row() for r in curve]
        roll = rolling_mean([r["total_reward"] for r in rows], window)
        for r, m in zip(rows, roll):
            w.writerow([label] + [_fmt(r[c]) for c in CURVE_COLUMNS] + [repr(float(m))])
    return buf.getvalue()


def export_evolution(history) -> str:
    """Per-generation mean and std of both objectives (history: list of GenerationLog)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EVOLUTION_COLUMNS)
    for g in history:
        F = np.asarray(g.objectives, dtype=np.float64)
        m, s = F.mean(axis=0), F.std(axis=0)
        w.writerow([g.generation, repr(float(m[0])), repr(float(s[0])), repr(float(m[1])),
                    repr(float(s[1]))])
    return buf.getvalue()
