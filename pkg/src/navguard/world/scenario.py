"""Scenario descriptors and deterministic episode resets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import yaml

from navguard.world.grid import OccupancyMap, load_map, nearest_occupied
from navguard.world.state import (Pedestrian, Pose, RobotConfig, SocialForceParams, Twist,
                                  WorldState)

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


class InvalidScenario(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    name: str
    map_path: str
    room_pairs: tuple[tuple[str, str], ...]
    n_pedestrians: int = 0
    # rooms (or the whole map when empty) where pedestrians spawn and walk to
    pedestrian_rooms: tuple[str, ...] = ()
    pedestrian_speed: tuple[float, float] = (0.6, 1.0)
    pedestrian_radius: float = 0.25
    spawn_clearance: float = 0.15
    min_patrol_length: float = 3.0
    horizon_steps: int = 400
    extra: dict = field(default_factory=dict, compare=False)

    def load_map(self) -> OccupancyMap:
        return _cached_map(self.resolve(self.map_path))

    def resolve(self, p: str) -> str:
        path = Path(p)
        if not path.is_absolute():
            base = Path(self.extra.get("base_dir", DATA_DIR / "maps"))
            path = base / path
        return str(path)


@lru_cache(maxsize=32)
def _cached_map(path: str) -> OccupancyMap:
    if not Path(path).exists():
        raise InvalidScenario(f"map file not found: {path}")
    return load_map(path)


def parse_scenario(data: dict, name: str = "scenario", base_dir: str | None = None) -> Scenario:
    try:
        pairs = tuple((str(a), str(b)) for a, b in data["room_pairs"])
        map_path = str(data["map"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidScenario(f"scenario {name!r} needs 'map' and 'room_pairs': {exc}") from None
    peds = data.get("pedestrians") or {}
    extra = {"base_dir": base_dir} if base_dir else {}
    return Scenario(
        name=str(data.get("name", name)),
        map_path=map_path,
        room_pairs=pairs,
        n_pedestrians=int(peds.get("count", 0)),
        pedestrian_rooms=tuple(peds.get("rooms", ())),
        pedestrian_speed=tuple(float(s) for s in peds.get("speed", (0.6, 1.0))),
        pedestrian_radius=float(peds.get("radius", 0.25)),
        horizon_steps=int(data.get("horizon_steps", 400)),
        extra=extra,
    )


def load_scenario(ref: str | Path) -> Scenario:
    """Load a scenario by file path or by the name of a bundled scenario."""
    path = Path(ref)
    if not path.suffix:
        path = DATA_DIR / "scenarios" / f"{ref}.yaml"
    if not path.exists():
        raise InvalidScenario(f"scenario not found: {ref}")
    data = yaml.safe_load(path.read_text()) or {}
    base = data.get("map_dir")
    base_dir = str((path.parent / base).resolve()) if base else None
    return parse_scenario(data, name=path.stem, base_dir=base_dir)


def sample_free_point(occ_map: OccupancyMap, rect: tuple[int, int, int, int],
                      clearance: float, rng: np.random.Generator, tries: int = 500) -> np.ndarray:
    x0, y0, x1, y1 = rect
    res = occ_map.resolution
    for _ in range(tries):
        x = rng.uniform(x0 * res, (x1 + 1) * res)
        y = rng.uniform(y0 * res, (y1 + 1) * res)
        if nearest_occupied(occ_map, x, y)[0] >= clearance:
            return np.array([x, y])
    raise InvalidScenario(f"no free spawn point with clearance {clearance} m in cells {rect}")


def reset_episode(scenario: Scenario, seed: int, robot: RobotConfig = RobotConfig(),
                  social: SocialForceParams = SocialForceParams(),
                  pair_index: int | None = None, occ_map: OccupancyMap | None = None) -> WorldState:
    """Spawn robot and pedestrians for one episode; fully determined by (scenario, seed).

    ``occ_map`` overrides the scenario's map (e.g. the same grid with another
    inflation radius).
    """
    occ_map = scenario.load_map() if occ_map is None else occ_map
    if not scenario.room_pairs:
        raise InvalidScenario(f"scenario {scenario.name!r} has no room pairs")
    for a, b in scenario.room_pairs:
        for room in (a, b):
            if room not in occ_map.rooms:
                raise InvalidScenario(f"room {room!r} not defined in map {occ_map.name!r}")
    rng = np.random.default_rng(seed)
    k = int(rng.integers(len(scenario.room_pairs))) if pair_index is None else pair_index
    src, dst = scenario.room_pairs[k]
    if rng.random() < 0.5:
        src, dst = dst, src
    # spawn far enough from walls that the start lies outside the planner's inflation
    clearance = max(occ_map.inflation_radius, robot.radius) + 0.05
    start = sample_free_point(occ_map, occ_map.rooms[src], clearance, rng)
    goal = sample_free_point(occ_map, occ_map.rooms[dst], clearance, rng)
    theta = float(rng.uniform(-math.pi, math.pi))

    ped_rects = [occ_map.rooms[r] for r in scenario.pedestrian_rooms] or \
        [(0, 0, occ_map.width_cells - 1, occ_map.height_cells - 1)]
    peds: list[Pedestrian] = []
    lo, hi = scenario.pedestrian_speed
    for _ in range(scenario.n_pedestrians):
        for _attempt in range(200):
            rect = ped_rects[int(rng.integers(len(ped_rects)))]
            p = sample_free_point(occ_map, rect, scenario.pedestrian_radius + 0.1, rng)
            far_from_robot = math.hypot(*(p - start)) > robot.radius + scenario.pedestrian_radius + 1.5
            far_from_peds = all(math.hypot(*(p - q.position)) > 2 * scenario.pedestrian_radius + 0.3
                                for q in peds)
            if far_from_robot and far_from_peds:
                break
        else:
            raise InvalidScenario("could not place pedestrians without initial overlap")
        # patrol legs shorter than a few meters leave pedestrians idling in place
        for _attempt in range(200):
            rect = ped_rects[int(rng.integers(len(ped_rects)))]
            g = sample_free_point(occ_map, rect, scenario.pedestrian_radius + 0.1, rng)
            if math.hypot(*(g - p)) >= scenario.min_patrol_length:
                break
        peds.append(Pedestrian(position=p, velocity=np.zeros(2), goal=g,
                               desired_speed=float(rng.uniform(lo, hi)),
                               radius=scenario.pedestrian_radius))
    return WorldState(map=occ_map, robot_pose=Pose(float(start[0]), float(start[1]), theta),
                      robot_twist=Twist(), pedestrians=tuple(peds), time=0.0, rng_seed=int(seed),
                      robot=robot, social=social, goal=goal)
