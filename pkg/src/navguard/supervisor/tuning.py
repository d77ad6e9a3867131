"""Objectives for tuning the fuzzy spreads: supervisor switches and critical ticks per episode."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from navguard.nn.policy import PolicyBundle
from navguard.rl.env import NavEnv
from navguard.rl.evaluate import run_episode
from navguard.supervisor.fuzzy import SIGMA_BOUNDS, FuzzyParams
from navguard.supervisor.nsga2 import NsgaConfig, NsgaResult, nsga2_run
from navguard.supervisor.switch import SupervisorConfig


@dataclass(frozen=True)
class Objectives:
    switches: float
    criticals: float

    def as_tuple(self) -> tuple[float, float]:
        return self.switches, self.criticals


def evaluate_genome(genome, bundle: PolicyBundle, envs: Sequence[NavEnv], seeds: Sequence[int],
                    noise_sigma: float = 0.1, sup_cfg: SupervisorConfig = SupervisorConfig()) -> Objectives:
    """Mean switch count and mean critical count over every (env, seed) episode.

    Each episode's action noise is drawn from a generator keyed on its seed, so every
    genome faces the same episodes and the same perturbations.
    """
    params = FuzzyParams.from_genome(genome)
    sw, cr = [], []
    for k, env in enumerate(envs):
        for s in seeds:
            rng = np.random.default_rng([int(s), k])
            ep = run_episode(env, "neural+supervisor", int(s), bundle, params, sup_cfg,
                             noise_sigma=noise_sigma, noise_rng=rng, with_expert=False)
            sw.append(ep.switches)
            cr.append(ep.criticals)
    return Objectives(float(np.mean(sw)), float(np.mean(cr)))


@dataclass(frozen=True, eq=False)
class GenomeObjective:
    """Picklable genome -> (switches, criticals), so process pools can evaluate generations."""
    bundle: PolicyBundle
    envs: tuple
    seeds: tuple
    noise_sigma: float = 0.1
    sup_cfg: SupervisorConfig = SupervisorConfig()

    def __call__(self, genome) -> tuple[float, float]:
        return evaluate_genome(genome, self.bundle, self.envs, self.seeds, self.noise_sigma,
                               self.sup_cfg).as_tuple()


def tune_supervisor(bundle: PolicyBundle, envs: Sequence[NavEnv], seeds: Sequence[int], seed: int = 0,
                    cfg: NsgaConfig = NsgaConfig(), noise_sigma: float = 0.1,
                    sup_cfg: SupervisorConfig = SupervisorConfig(), on_generation=None,
                    map_fn=map) -> NsgaResult:
    """NSGA-II over the four spreads, seeded with the all-0.5 individual."""
    lo, hi = SIGMA_BOUNDS
    objective = GenomeObjective(bundle, tuple(envs), tuple(seeds), noise_sigma, sup_cfg)
    return nsga2_run(objective, [lo] * 4, [hi] * 4, seed=seed, cfg=cfg,
                     initial=[FuzzyParams().genome()], on_generation=on_generation, map_fn=map_fn)


def pick_params(result: NsgaResult) -> FuzzyParams:
    """Front member with the fewest criticals (ties: fewer switches)."""
    F = result.front_objectives
    i = int(np.lexsort((F[:, 0], F[:, 1]))[0])
    return FuzzyParams.from_genome(result.front_genomes[i])
