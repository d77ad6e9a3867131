"""Command line: navguard {train,evaluate,tune-supervisor,replay,export-metrics}.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Outputs for seed s go to <out>/seed_<s>/; evaluate also writes <out>/metrics.csv.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from navguard.harness import runner
from navguard.harness.config import (DATA_CONFIGS, Config, ConfigError, dumps, load_config,
                                     with_overrides)
from navguard.harness.logs import TruncatedLog, log_files, replay
from navguard.harness.metrics import InsufficientData, aggregate_metrics
from navguard.harness.plots import export_plot_data
from navguard.nn.checkpoint import CheckpointError

log = logging.getLogger("navguard")

CHECKPOINT = "policy.e2t3"
CURVE = "training_curve.csv"


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="navguard", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def common(sp, out=True):
        sp.add_argument("--config", default="default",
                        help=f"YAML config file or bundled name (in {DATA_CONFIGS})")
        sp.add_argument("--seed", type=int, default=None, help="override run.seeds with one seed")
        if out:
            sp.add_argument("--out", default=None, help="output directory (default: run.out)")
        sp.add_argument("--algorithm", default=None, help="override run.algorithm")
        sp.add_argument("-v", "--verbose", action="store_true")

    sp = sub.add_parser("train", help="train a policy and write its checkpoint and curve")
    common(sp)
    sp = sub.add_parser("evaluate", help="evaluate a policy and write metrics.csv + episode logs")
    common(sp)
    sp.add_argument("--checkpoint", default=None, help="policy to evaluate (default: train one)")
    sp.add_argument("--steps", type=int, default=None, help="override run.eval_steps")
    sp = sub.add_parser("tune-supervisor", help="NSGA-II over the fuzzy spreads")
    common(sp)
    sp.add_argument("--checkpoint", default=None, help="frozen policy (default: train one)")
    sp = sub.add_parser("replay", help="recompute episode metrics from JSONL logs")
    sp.add_argument("log", help="a .jsonl(.gz) file or a directory of them")
    sp.add_argument("-v", "--verbose", action="store_true")
    sp = sub.add_parser("export-metrics",
                        help="rebuild metrics and plot data from the logs under --out")
    sp.add_argument("--out", required=True, help="directory written by evaluate / train")
    sp.add_argument("-v", "--verbose", action="store_true")
    return p


def _config(args) -> Config:
    cfg = load_config(args.config)
    changes: dict = {"run": {}}
    if args.seed is not None:
        changes["run"]["seeds"] = [args.seed]
    if getattr(args, "out", None):
        changes["run"]["out"] = args.out
    if args.algorithm:
        changes["run"]["algorithm"] = args.algorithm
    if getattr(args, "steps", None):
        changes["run"]["eval_steps"] = args.steps
    if getattr(args, "checkpoint", None):
        changes["run"]["checkpoint"] = args.checkpoint
    cfg = with_overrides(cfg, changes)
    if cfg.run.checkpoint and not Path(cfg.run.checkpoint).is_file():
        raise ConfigError(f"checkpoint not found: {cfg.run.checkpoint}")
    return cfg


def _seed_dir(cfg: Config, seed: int) -> Path:
    d = Path(cfg.run.out) / f"seed_{seed}"
    d.mkdir(parents=True, exist_ok=True)
    return d


def _train_into(cfg: Config, seed: int, d: Path):
    # evaluate/tune of the supervised mode train the regularized learner underneath
    algo = "rl+dwa" if cfg.run.algorithm in ("rl+dwa+supervisor", "dwa") else cfg.run.algorithm
    tcfg = cfg.with_algorithm(algo)
    res = runner.train_policy(tcfg, seed, on_episode=lambda r: log.debug(
        "episode %d (%s) steps=%d reward=%.2f", r.episode, r.phase, r.steps, r.total_reward))
    runner.save_bundle(res.bundle, d / CHECKPOINT)
    (d / CURVE).write_text(runner.curve_csv(res.curve))
    return res.bundle


def _bundle_for(cfg: Config, seed: int, d: Path):
    if cfg.run.checkpoint:
        return runner.load_bundle(cfg.run.checkpoint)
    log.info("no checkpoint given: training seed %d first", seed)
    return _train_into(cfg, seed, d)


def cmd_train(cfg: Config) -> int:
    if cfg.run.algorithm == "dwa":
        raise ConfigError("algorithm 'dwa' has nothing to train")
    for seed in cfg.run.seeds:
        d = _seed_dir(cfg, seed)
        (d / "config.yaml").write_text(dumps(cfg))
        _train_into(cfg, seed, d)
        log.info("seed %d: wrote %s and %s", seed, d / CHECKPOINT, d / CURVE)
    return 0


def cmd_evaluate(cfg: Config) -> int:
    rows = []
    for seed in cfg.run.seeds:
        d = _seed_dir(cfg, seed)
        bundle = None if cfg.run.algorithm == "dwa" else _bundle_for(cfg, seed, d)
        ep_dir = d / "episodes"
        if ep_dir.exists():
            for f in log_files(ep_dir):
                f.unlink()
        row, _ = runner.evaluate_run(cfg, seed, bundle, log_dir=ep_dir)
        (d / "metrics.csv").write_text(runner.metrics_csv([row], [seed]))
        rows.append(row)
        log.info("seed %d: %s reward %s critical%% %s", seed, row.label, row.total_reward,
                 row.critical_pct)
    out = Path(cfg.run.out) / "metrics.csv"
    out.write_text(runner.metrics_csv(rows, list(cfg.run.seeds)))
    print(out.read_text(), end="")
    return 0


def cmd_tune(cfg: Config) -> int:
    for seed in cfg.run.seeds:
        d = _seed_dir(cfg, seed)
        bundle = _bundle_for(cfg, seed, d)
        res = runner.tune_run(cfg, seed, bundle, on_generation=lambda g: log.info(
            "generation %d: mean switches %.3f, mean criticals %.3f", g.generation, *g.means()))
        (d / "evolution.csv").write_text(runner.evolution_csv(res))
        (d / "evolution_stats.csv").write_text(runner.evolution_stats_csv(res))
        (d / "front.yaml").write_text(runner.front_yaml(res))
        print(f"seed {seed}: front of {len(res.front_genomes)} written to {d / 'front.yaml'}")
    return 0


def cmd_replay(path: str) -> int:
    try:
        episodes = replay(path)
    except TruncatedLog as exc:
        print(f"truncated log: {exc.path}: last valid line {exc.last_valid}", file=sys.stderr)
        return 1
    print("file,timesteps,total_reward,total_r_collision,mse_dwa_pct,critical_pct,switches,"
          "matches_summary")
    ok = True
    for ep in episodes:
        s = ep.recomputed
        match = ep.logged is not None and abs(ep.logged["total_reward"] - s.total_reward) < 1e-6 \
            and ep.logged["timesteps"] == s.timesteps
        ok &= match
        print(f"{ep.path},{s.timesteps},{s.total_reward!r},{s.total_r_collision!r},"
              f"{s.mse_dwa_pct!r},{s.critical_pct!r},{s.switches},{match}")
    if len(episodes) >= 2:
        row = aggregate_metrics([e.recomputed for e in episodes])
        print(f"# total_reward {row.total_reward}  critical_pct {row.critical_pct}")
    return 0 if ok else 1


def cmd_export(out: str) -> int:
    root = Path(out)
    if not root.is_dir():
        raise FileNotFoundError(f"no such output directory: {root}")
    seed_dirs = sorted(p for p in root.iterdir() if p.is_dir() and p.name.startswith("seed_"))
    curves = {}
    rows, seeds = [], []
    for d in seed_dirs:
        seed = int(d.name.split("_", 1)[1])
        if (d / CURVE).is_file():
            curves[f"seed_{seed}"] = runner.read_curve_csv(d / CURVE)
        if (d / "episodes").is_dir():
            eps = [e.recomputed for e in replay(d / "episodes")]
            if eps:
                rows.append(aggregate_metrics(eps, label=f"seed_{seed}"))
                seeds.append(seed)
    (root / "plot_data.csv").write_text(export_plot_data(curves))
    if rows:
        (root / "metrics_from_logs.csv").write_text(runner.metrics_csv(rows, seeds))
    print(f"wrote {root / 'plot_data.csv'}" + (f" and {root / 'metrics_from_logs.csv'}" if rows else ""))
    return 0


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        if args.command == "replay":
            return cmd_replay(args.log)
        if args.command == "export-metrics":
            return cmd_export(args.out)
        cfg = _config(args)
        runner.worker_count()
        return {"train": cmd_train, "evaluate": cmd_evaluate, "tune-supervisor": cmd_tune}[
            args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (TruncatedLog, CheckpointError, InsufficientData, OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
