"""NSGA-II over real-valued genomes (minimization of every objective).

Fast non-dominated sorting, crowding distance, binary tournaments on
(rank, crowding), simulated binary crossover and polynomial mutation,
with elitist (mu + lambda) survivor selection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


def dominates(a, b) -> bool:
    a = np.asarray(a)
    b = np.asarray(b)
    return bool(np.all(a <= b) and np.any(a < b))


def fast_non_dominated_sort(F: np.ndarray) -> list[list[int]]:
    """Fronts as lists of row indices into ``F`` (n, m), best front first."""
    F = np.asarray(F, dtype=np.float64)
    n = len(F)
    # le[i, j]: i is no worse than j everywhere; lt[i, j]: strictly better somewhere
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    dom = le & lt
    counts = dom.sum(axis=0)
    fronts = []
    current = [i for i in range(n) if counts[i] == 0]
    while current:
        fronts.append(current)
        nxt = []
        for i in current:
            for j in np.nonzero(dom[i])[0]:
                counts[j] -= 1
                if counts[j] == 0:
                    nxt.append(int(j))
        current = sorted(nxt)
    return fronts


def crowding_distance(F: np.ndarray) -> np.ndarray:
    """Crowding distance within one front; boundary points get inf."""
    F = np.asarray(F, dtype=np.float64)
    n, m = F.shape
    d = np.zeros(n)
    if n <= 2:
        d[:] = np.inf
        return d
    for k in range(m):
        order = np.argsort(F[:, k], kind="stable")
        lo, hi = F[order[0], k], F[order[-1], k]
        d[order[0]] = d[order[-1]] = np.inf
        if hi == lo:
            continue
        d[order[1:-1]] += (F[order[2:], k] - F[order[:-2], k]) / (hi - lo)
    return d


def rank_and_crowding(F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = len(F)
    rank = np.zeros(n, dtype=int)
    crowd = np.zeros(n)
    for r, front in enumerate(fast_non_dominated_sort(F)):
        rank[front] = r
        crowd[front] = crowding_distance(np.asarray(F)[front])
    return rank, crowd


def _better(i, j, rank, crowd) -> bool:
    if rank[i] != rank[j]:
        return rank[i] < rank[j]
    return crowd[i] > crowd[j]


def binary_tournament(rank, crowd, rng: np.random.Generator) -> int:
    i, j = rng.choice(len(rank), size=2, replace=False)
    return int(i) if _better(i, j, rank, crowd) else int(j)


def sbx_crossover(p1, p2, lo, hi, eta: float, rng: np.random.Generator, p_gene: float = 0.5):
    """Bounded simulated binary crossover (Deb and Agrawal), per-gene with prob ``p_gene``."""
    c1 = np.array(p1, dtype=np.float64)
    c2 = np.array(p2, dtype=np.float64)
    lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), c1.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), c1.shape)
    for k in range(len(c1)):
        if rng.random() > p_gene or abs(c1[k] - c2[k]) < 1e-14:
            continue
        y1, y2 = min(c1[k], c2[k]), max(c1[k], c2[k])
        span = y2 - y1
        u = rng.random()
        out = []
        for beta in (1.0 + 2.0 * (y1 - lo[k]) / span, 1.0 + 2.0 * (hi[k] - y2) / span):
            alpha = 2.0 - beta ** -(eta + 1.0)
            if u <= 1.0 / alpha:
                bq = (u * alpha) ** (1.0 / (eta + 1.0))
            else:
                bq = (1.0 / (2.0 - u * alpha)) ** (1.0 / (eta + 1.0))
            out.append(bq)
        a = 0.5 * ((y1 + y2) - out[0] * span)
        b = 0.5 * ((y1 + y2) + out[1] * span)
        a, b = np.clip(a, lo[k], hi[k]), np.clip(b, lo[k], hi[k])
        if rng.random() < 0.5:
            a, b = b, a
        c1[k], c2[k] = a, b
    return c1, c2


def polynomial_mutation(x, lo, hi, eta: float, p_gene: float, rng: np.random.Generator):
    """Bounded polynomial mutation (Deb), each gene mutated with probability ``p_gene``."""
    y = np.array(x, dtype=np.float64)
    lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), y.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), y.shape)
    for k in range(len(y)):
        if rng.random() >= p_gene:
            continue
        span = hi[k] - lo[k]
        d1 = (y[k] - lo[k]) / span
        d2 = (hi[k] - y[k]) / span
        u = rng.random()
        mp = 1.0 / (eta + 1.0)
        if u < 0.5:
            val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta + 1.0)
            dq = val ** mp - 1.0
        else:
            val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2) ** (eta + 1.0)
            dq = 1.0 - val ** mp
        y[k] = np.clip(y[k] + dq * span, lo[k], hi[k])
    return y


def environmental_selection(F: np.ndarray, n_keep: int) -> np.ndarray:
    """Indices of the n_keep survivors: whole fronts first, the last one cut by crowding."""
    keep: list[int] = []
    for front in fast_non_dominated_sort(F):
        if len(keep) + len(front) <= n_keep:
            keep.extend(front)
            continue
        cd = crowding_distance(np.asarray(F)[front])
        order = np.argsort(-cd, kind="stable")
        keep.extend(int(front[i]) for i in order[: n_keep - len(keep)])
        break
    return np.asarray(keep, dtype=int)


def hypervolume_2d(F: np.ndarray, ref) -> float:
    """Dominated area of a two-objective point set w.r.t. reference point ``ref``."""
    F = np.asarray(F, dtype=np.float64)
    F = F[np.all(F < np.asarray(ref), axis=1)]
    if len(F) == 0:
        return 0.0
    F = F[np.argsort(F[:, 0], kind="stable")]
    hv = 0.0
    best_y = ref[1]
    for x, y in F:
        if y < best_y:
            hv += (ref[0] - x) * (best_y - y)
            best_y = y
    return float(hv)


@dataclass
class NsgaConfig:
    population_size: int = 16
    generations: int = 16
    eta_crossover: float = 15.0
    eta_mutation: float = 20.0
    p_crossover: float = 0.9
    # per-gene mutation probability; None means 1 / n_genes
    p_mutation: float | None = 0.25

    def __post_init__(self):
        if self.population_size < 2 or self.population_size % 2:
            raise ValueError("population_size must be an even number >= 2")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")


@dataclass
class GenerationLog:
    generation: int
    genomes: np.ndarray
    objectives: np.ndarray
    rank: np.ndarray

    def means(self) -> np.ndarray:
        return self.objectives.mean(axis=0)


@dataclass
class NsgaResult:
    front_genomes: np.ndarray
    front_objectives: np.ndarray
    history: list[GenerationLog] = field(default_factory=list)
    all_genomes: np.ndarray | None = None
    all_objectives: np.ndarray | None = None


def nsga2_run(evaluate: Callable[[np.ndarray], Sequence[float]], lo, hi, seed: int = 0,
              cfg: NsgaConfig = NsgaConfig(), initial: Sequence[Sequence[float]] = (),
              on_generation: Callable[[GenerationLog], None] | None = None,
              map_fn=map) -> NsgaResult:
    """Evolve ``cfg.population_size`` genomes for ``cfg.generations`` generations.

    Generation 0 is the initial population (``initial`` rows first, the rest uniform
    over the box); generation g >= 1 is the survivor set after the g-th offspring round.
    Returns the non-dominated set of every individual evaluated during the run plus
    the per-generation log.
    ``map_fn`` evaluates one generation (e.g. a process pool's ``map``); results are
    consumed in order, so the outcome does not depend on it.
    """
    rng = np.random.default_rng(seed)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    n_genes = len(lo)
    n = cfg.population_size
    p_mut = cfg.p_mutation if cfg.p_mutation is not None else 1.0 / n_genes

    pop = rng.uniform(lo, hi, size=(n, n_genes))
    for i, g in enumerate(list(initial)[:n]):
        pop[i] = np.clip(np.asarray(g, dtype=np.float64), lo, hi)
    F = np.array(list(map_fn(evaluate, list(pop))), dtype=np.float64)
    seen_g, seen_f = [pop.copy()], [F.copy()]

    def log(gen):
        rank, _ = rank_and_crowding(F)
        entry = GenerationLog(gen, pop.copy(), F.copy(), rank)
        history.append(entry)
        if on_generation is not None:
            on_generation(entry)

    history: list[GenerationLog] = []
    log(0)
    for gen in range(1, cfg.generations + 1):
        rank, crowd = rank_and_crowding(F)
        kids = []
        while len(kids) < n:
            a = pop[binary_tournament(rank, crowd, rng)]
            b = pop[binary_tournament(rank, crowd, rng)]
            if rng.random() < cfg.p_crossover:
                a, b = sbx_crossover(a, b, lo, hi, cfg.eta_crossover, rng)
            kids.append(polynomial_mutation(a, lo, hi, cfg.eta_mutation, p_mut, rng))
            kids.append(polynomial_mutation(b, lo, hi, cfg.eta_mutation, p_mut, rng))
        kids = np.array(kids[:n])
        FK = np.array(list(map_fn(evaluate, list(kids))), dtype=np.float64)
        seen_g.append(kids)
        seen_f.append(FK)
        union = np.vstack([pop, kids])
        FU = np.vstack([F, FK])
        keep = environmental_selection(FU, n)
        pop, F = union[keep], FU[keep]
        log(gen)

    # the reported front is taken over every evaluated individual: crowding truncation may have
    # dropped a point that still dominates part of the final population
    all_g, all_f = np.vstack(seen_g), np.vstack(seen_f)
    _, uniq = np.unique(np.hstack([all_g, all_f]), axis=0, return_index=True)
    uniq = np.sort(uniq)
    first = uniq[fast_non_dominated_sort(all_f[uniq])[0]]
    return NsgaResult(all_g[first], all_f[first], history, all_g, all_f)
