"""Glue between a Config and the modules: build environments, train, evaluate, tune."""

from __future__ import annotations

import csv
import io
import logging
import os
from pathlib import Path

import numpy as np
import yaml

from navguard.harness.config import Config, ConfigError
from navguard.harness.logs import EpisodeLogWriter, episode_log_path
from navguard.harness.metrics import MetricsRow
from navguard.harness.plots import export_evolution
from navguard.nn.checkpoint import load_checkpoint, save_checkpoint
from navguard.nn.policy import PolicyBundle
from navguard.rl.env import NavEnv
from navguard.rl.evaluate import evaluate_policy
from navguard.rl.train import CURVE_COLUMNS, TrainResult, train
from navguard.supervisor.fuzzy import FuzzyParams
from navguard.supervisor.nsga2 import NsgaConfig, NsgaResult
from navguard.supervisor.tuning import pick_params, tune_supervisor
from navguard.world.scenario import load_scenario

log = logging.getLogger("navguard")

# algorithm name -> evaluation policy source
SOURCE_OF = {"dwa": "dwa", "rl": "neural", "rl+dwa": "neural", "rl+dwa+supervisor": "neural+supervisor"}


def worker_count() -> int:
    try:
        n = int(os.environ.get("NAVGUARD_THREADS", "1"))
    except ValueError:
        raise ConfigError("NAVGUARD_THREADS must be an integer") from None
    return max(1, n)


def make_env(cfg: Config, scenario: str | None = None) -> NavEnv:
    return NavEnv(load_scenario(scenario or cfg.run.scenario), cfg.env_config(),
                  horizon=cfg.td3.horizon_steps)


def train_policy(cfg: Config, seed: int, on_episode=None) -> TrainResult:
    if cfg.run.algorithm == "dwa":
        raise ConfigError("algorithm 'dwa' has nothing to train")
    env = make_env(cfg)
    return train(env, cfg.td3_config(), seed, trunk=cfg.nn.trunk, conv=cfg.nn.conv,
                 adam=cfg.nn.adam, on_episode=on_episode)


def supervisor_params(cfg: Config) -> FuzzyParams:
    if cfg.supervisor.front:
        return load_front(cfg.supervisor.front)
    return cfg.supervisor.params


def evaluate_run(cfg: Config, seed: int, bundle: PolicyBundle | None,
                 log_dir: Path | None = None, label: str | None = None):
    """Frozen-policy evaluation of ``cfg.run.algorithm`` for ``cfg.run.eval_steps`` ticks."""
    source = SOURCE_OF[cfg.run.algorithm]
    if source != "dwa" and bundle is None:
        raise ConfigError(f"algorithm {cfg.run.algorithm!r} needs a trained policy")
    env = make_env(cfg)
    sink = _LogSink(log_dir) if log_dir is not None else None
    row, episodes = evaluate_policy(
        env, source, n_steps=cfg.run.eval_steps, seed=seed, bundle=bundle,
        params=supervisor_params(cfg) if source == "neural+supervisor" else None,
        sup_cfg=cfg.supervisor.switch, on_step=sink.step if sink else None,
        on_episode=sink.episode if sink else None, label=label or cfg.run.algorithm)
    return row, episodes


class _LogSink:
    """One JSONL file per episode, opened on the episode's first tick."""

    def __init__(self, directory: Path):
        self.directory = Path(directory)
        self.writer: EpisodeLogWriter | None = None
        self.count = 0

    def step(self, rec: dict) -> None:
        if self.writer is None:
            self.writer = EpisodeLogWriter(episode_log_path(self.directory, self.count))
            self.count += 1
        self.writer.step(rec)

    def episode(self, index: int, summary) -> None:
        self.writer.summary(index, summary)
        self.writer.close()
        self.writer = None


def tune_run(cfg: Config, seed: int, bundle: PolicyBundle, on_generation=None) -> NsgaResult:
    sc = cfg.supervisor
    envs = [make_env(cfg, s) for s in sc.scenarios]
    ncfg = NsgaConfig(population_size=sc.population, generations=sc.generations)
    n = worker_count()
    if n > 1:
        from multiprocessing import get_context
        with get_context("fork").Pool(n) as pool:
            return tune_supervisor(bundle, envs, sc.episodes, seed=seed, cfg=ncfg,
                                   noise_sigma=sc.noise_sigma, sup_cfg=sc.switch,
                                   on_generation=on_generation, map_fn=pool.map)
    return tune_supervisor(bundle, envs, sc.episodes, seed=seed, cfg=ncfg,
                           noise_sigma=sc.noise_sigma, sup_cfg=sc.switch,
                           on_generation=on_generation)


# ---------------------------------------------------------------------------
# files

def metrics_csv(rows: list[MetricsRow], seeds: list[int] | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    flat = [r.flat() for r in rows]
    cols = (["seed"] if seeds is not None else []) + list(flat[0])
    w.writerow(cols)
    for i, f in enumerate(flat):
        vals = [repr(v) if isinstance(v, float) else v for v in f.values()]
        w.writerow(([seeds[i]] if seeds is not None else []) + vals)
    return buf.getvalue()


def curve_csv(curve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    for r in curve:
        row = r.row()
        w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in CURVE_COLUMNS])
    return buf.getvalue()


def read_curve_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        out.append({"episode": int(r["episode"]), "steps": int(r["steps"]),
                    "total_reward": float(r["total_reward"]),
                    "total_r_collision": float(r["total_r_collision"]),
                    "mse_dwa_pct": float(r["mse_dwa_pct"]), "critical_pct": float(r["critical_pct"]),
                    "phase": r["phase"]})
    return out


def evolution_csv(result: NsgaResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["generation", "sigma_v_low", "sigma_v_high", "sigma_r_small", "sigma_r_big",
                "switches_mean", "criticals_mean", "rank"])
    for g in result.history:
        for genome, obj, rank in zip(g.genomes, g.objectives, g.rank):
            w.writerow([g.generation, *[repr(float(x)) for x in genome],
                        repr(float(obj[0])), repr(float(obj[1])), int(rank)])
    return buf.getvalue()


def evolution_stats_csv(result: NsgaResult) -> str:
    return export_evolution(result.history)


def front_yaml(result: NsgaResult) -> str:
    members = [{"genome": [float(x) for x in g], "switches": float(f[0]), "criticals": float(f[1])}
               for g, f in zip(result.front_genomes, result.front_objectives)]
    chosen = pick_params(result)
    doc = {"selected": [float(x) for x in chosen.genome()], "front": members}
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)


def load_front(path) -> FuzzyParams:
    try:
        doc = yaml.safe_load(Path(path).read_text())
        return FuzzyParams.from_genome(np.asarray(doc["selected"], dtype=np.float64))
    except (OSError, KeyError, TypeError, ValueError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read supervisor front {path}: {exc}") from None


def save_bundle(bundle: PolicyBundle, path) -> None:
    save_checkpoint(bundle, path)


def load_bundle(path) -> PolicyBundle:
    return load_checkpoint(path)
