"""Runtime safety switch and the evolutionary tuning of its fuzzy radius."""

from navguard.supervisor.fuzzy import (CENTER_R_BIG, CENTER_R_SMALL, CENTER_V_HIGH, CENTER_V_LOW,
                                       SIGMA_BOUNDS, FuzzyParams, fuzzy_radius, gaussian, memberships)
from navguard.supervisor.nsga2 import (NsgaConfig, NsgaResult, crowding_distance, dominates,
                                       fast_non_dominated_sort, hypervolume_2d, nsga2_run)
from navguard.supervisor.switch import (BACKOFF, CRITICAL_DISTANCE, NEURAL, SAFE, SupervisorConfig,
                                        SupervisorState, select_policy, supervise_step)

__all__ = [
    "BACKOFF", "CENTER_R_BIG", "CENTER_R_SMALL", "CENTER_V_HIGH", "CENTER_V_LOW", "CRITICAL_DISTANCE",
    "FuzzyParams", "NEURAL", "NsgaConfig", "NsgaResult", "SAFE", "SIGMA_BOUNDS", "SupervisorConfig",
    "SupervisorState", "crowding_distance", "dominates", "fast_non_dominated_sort", "fuzzy_radius",
    "gaussian", "hypervolume_2d", "memberships", "nsga2_run", "select_policy", "supervise_step",
]
