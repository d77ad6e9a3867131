"""Per-episode JSONL logs: one object per step, then one summary object.

Each episode gets its own file (``episodes/ep_00000.jsonl``); files that end up
larger than ``GZIP_THRESHOLD`` bytes are gzip-compressed on close.
"""

from __future__ import annotations

import gzip
import json
import os
from dataclasses import dataclass
from pathlib import Path

from navguard.harness.metrics import EpisodeSummary, summarize_steps

GZIP_THRESHOLD = 10 * 1024 * 1024


class TruncatedLog(ValueError):
    """A log line failed to parse; ``last_valid`` is the 1-based number of the last good line."""

    def __init__(self, path, last_valid: int, reason: str):
        super().__init__(f"{path}: invalid line {last_valid + 1} ({reason}); "
                         f"last valid line is {last_valid}")
        self.path = str(path)
        self.last_valid = last_valid


class EpisodeLogWriter:
    def __init__(self, path, gzip_threshold: int = GZIP_THRESHOLD):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.gzip_threshold = gzip_threshold
        self._fh = open(self.path, "w", encoding="utf-8")
        self.final_path = self.path

    def step(self, record: dict) -> None:
        self._fh.write(json.dumps({"type": "step", **record}, sort_keys=True) + "\n")

    def summary(self, episode: int, summary: EpisodeSummary, extra: dict | None = None) -> None:
        rec = {"type": "episode", "episode": episode, **summary.as_dict(), **(extra or {})}
        self._fh.write(json.dumps(rec, sort_keys=True) + "\n")

    def close(self) -> Path:
        self._fh.close()
        if self.path.stat().st_size > self.gzip_threshold:
            gz = self.path.with_name(self.path.name + ".gz")
            # mtime=0 keeps the compressed bytes reproducible
            with open(self.path, "rb") as src, open(gz, "wb") as raw, \
                    gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0) as dst:
                dst.write(src.read())
            os.remove(self.path)
            self.final_path = gz
        return self.final_path

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def episode_log_path(directory, index: int) -> Path:
    return Path(directory) / f"ep_{index:05d}.jsonl"


def _open_text(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, "r", encoding="utf-8")


def read_log(path) -> list[dict]:
    """All records of one log file; raises TruncatedLog at the first unparsable line."""
    path = Path(path)
    out = []
    with _open_text(path) as fh:
        try:
            for i, line in enumerate(fh):
                if not line.endswith("\n"):
                    raise TruncatedLog(path, i, "missing newline")
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise TruncatedLog(path, i, exc.msg) from None
                if not isinstance(rec, dict) or "type" not in rec:
                    raise TruncatedLog(path, i, "not a log record")
                out.append(rec)
        except (EOFError, gzip.BadGzipFile, OSError) as exc:
            raise TruncatedLog(path, len(out), f"compressed stream ended early: {exc}") from None
    return out


def log_files(path) -> list[Path]:
    path = Path(path)
    if path.is_dir():
        return sorted(p for p in path.iterdir() if p.name.endswith((".jsonl", ".jsonl.gz")))
    if not path.exists():
        raise FileNotFoundError(str(path))
    return [path]


@dataclass
class ReplayedEpisode:
    path: str
    recomputed: EpisodeSummary
    logged: dict | None


def replay(path) -> list[ReplayedEpisode]:
    """Recompute every episode summary from its step lines.

    Step lines are grouped into episodes by the summary lines that close them;
    trailing steps without a summary form a final, unsummarized episode.
    """
    out = []
    for f in log_files(path):
        steps: list[dict] = []
        for rec in read_log(f):
            if rec["type"] == "step":
                steps.append(rec)
            elif rec["type"] == "episode":
                out.append(ReplayedEpisode(str(f), summarize_steps(steps), rec))
                steps = []
        if steps:
            out.append(ReplayedEpisode(str(f), summarize_steps(steps), None))
    return out
