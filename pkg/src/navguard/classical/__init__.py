"""Classical planners: grid A*, DWA expert, pure-pursuit fallback and back-off."""

from navguard.classical.astar import (GlobalPath, NoPath, extract_waypoint, extract_waypoint_index,
                                      inflated_grid, plan_global)
from navguard.classical.dwa import DwaConfig, ExpertAction, dwa_action, score_window, select_best
from navguard.classical.pursuit import backoff_action, pure_pursuit_action, pursuit_curvature

__all__ = [
    "DwaConfig", "ExpertAction", "GlobalPath", "NoPath", "backoff_action", "dwa_action",
    "extract_waypoint", "extract_waypoint_index", "inflated_grid", "plan_global",
    "pure_pursuit_action", "pursuit_curvature", "score_window", "select_best",
]
