"""Rule-based switch between the neural policy, the safe pure-pursuit policy and back-off."""

from __future__ import annotations

from dataclasses import dataclass, replace

from navguard.supervisor.fuzzy import FuzzyParams, fuzzy_radius

NEURAL = "neural"
SAFE = "safe"
BACKOFF = "backoff"
CRITICAL_DISTANCE = 0.3


@dataclass(frozen=True)
class SupervisorConfig:
    # minimum ticks spent in the safe policy before handing back; 0 = no debouncing
    hysteresis: int = 5
    critical_distance: float = CRITICAL_DISTANCE

    def __post_init__(self):
        if self.hysteresis < 0:
            raise ValueError("hysteresis must be >= 0")


@dataclass(frozen=True)
class SupervisorState:
    active_policy: str = NEURAL
    # planner-level mode (neural or safe); back-off is a reflex layered on top
    mode: str = NEURAL
    switch_count: int = 0
    critical_count: int = 0
    hysteresis_ticks: int = 0


def select_policy(distance: float, radius: float, state: SupervisorState,
                  cfg: SupervisorConfig = SupervisorConfig()) -> tuple[str, SupervisorState]:
    """One supervisor tick for a given obstacle distance and radius."""
    if distance < cfg.critical_distance:
        ticks = state.hysteresis_ticks + 1 if state.mode == SAFE else 0
        return BACKOFF, replace(state, active_policy=BACKOFF, critical_count=state.critical_count + 1,
                                hysteresis_ticks=ticks)
    want = SAFE if distance < radius else NEURAL
    mode, switches, ticks = state.mode, state.switch_count, state.hysteresis_ticks
    if mode == NEURAL and want == SAFE:
        mode, switches, ticks = SAFE, switches + 1, 0
    elif mode == SAFE and want == NEURAL and ticks >= cfg.hysteresis:
        mode, switches, ticks = NEURAL, switches + 1, 0
    if mode == SAFE:
        ticks += 1
    return mode, replace(state, active_policy=mode, mode=mode, switch_count=switches,
                         hysteresis_ticks=ticks)


def supervise_step(distance: float, v: float, params: FuzzyParams, state: SupervisorState,
                   cfg: SupervisorConfig = SupervisorConfig()) -> tuple[str, SupervisorState]:
    """Choose the acting policy from obstacle distance and measured linear speed."""
    return select_policy(distance, fuzzy_radius(abs(v), params), state, cfg)
