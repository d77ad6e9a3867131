"""Policy observations: 360-degree lidar, egocentric costmap, velocity and waypoint."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from navguard.world.grid import raycast_grid
from navguard.world.state import Twist, WorldState

FREE, UNKNOWN, OCCUPIED = 0.0, 0.5, 1.0


@dataclass(frozen=True, eq=False)
class LidarScan:
    n_rays: int
    max_range: float
    ranges: np.ndarray

    @property
    def angles(self) -> np.ndarray:
        """Beam angles in the robot frame."""
        return 2.0 * np.pi * np.arange(self.n_rays) / self.n_rays

    def hit_points(self) -> np.ndarray:
        """Robot-frame coordinates of beams that returned before max range."""
        hit = self.ranges < self.max_range
        a = self.angles[hit]
        r = self.ranges[hit]
        return np.stack([r * np.cos(a), r * np.sin(a)], axis=1)

    def sector_minima(self, n_sectors: int) -> np.ndarray:
        """Minimum range per angular sector, normalised by max range (the ray-vector features)."""
        edges = (np.arange(n_sectors) * self.n_rays) // n_sectors
        return np.minimum.reduceat(self.ranges, edges) / self.max_range


@dataclass(frozen=True, eq=False)
class Costmap:
    """Robot-centred, heading-aligned grid; ``values[i, j]`` is the cell at x-index i, y-index j."""
    values: np.ndarray
    side_m: float = 6.0

    @property
    def cells_per_side(self) -> int:
        return self.values.shape[0]

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        scale = self.cells_per_side / self.side_m
        half = 0.5 * self.side_m
        return int(math.floor((x + half) * scale)), int(math.floor((y + half) * scale))


@dataclass(frozen=True, eq=False)
class Observation:
    costmap: Costmap | None
    velocity: Twist
    waypoint_rel: np.ndarray
    rays: np.ndarray | None = None
    # short-range point on the global path (robot frame), the point the expert steers at
    carrot_rel: np.ndarray | None = None


def _ray_disc_ranges(ox, oy, angles, centers, radii, max_range):
    out = np.full(angles.shape[0], max_range)
    if len(centers) == 0:
        return out
    d = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    for (cx, cy), r in zip(centers, radii):
        rel = np.array([cx - ox, cy - oy])
        proj = d @ rel
        perp2 = rel @ rel - proj * proj
        disc = r * r - perp2
        if rel @ rel <= r * r:
            return np.zeros_like(out)
        t = proj - np.sqrt(np.maximum(disc, 0.0))
        ok = (disc >= 0.0) & (t >= 0.0)
        out = np.where(ok, np.minimum(out, t), out)
    return out


def raycast_scan(state: WorldState, n_rays: int = 360, max_range: float = 6.0) -> LidarScan:
    """Cast ``n_rays`` evenly spaced beams against walls and pedestrian discs."""
    if n_rays < 1:
        raise ValueError("n_rays must be >= 1")
    pose = state.robot_pose
    angles = pose.theta + 2.0 * np.pi * np.arange(n_rays) / n_rays
    ranges = raycast_grid(state.map, pose.x, pose.y, angles, max_range)
    if state.pedestrians:
        centers = [p.position for p in state.pedestrians]
        radii = [p.radius for p in state.pedestrians]
        ranges = np.minimum(ranges, _ray_disc_ranges(pose.x, pose.y, angles, centers, radii, max_range))
    return LidarScan(n_rays=n_rays, max_range=float(max_range), ranges=np.minimum(ranges, max_range))


@numba.njit(cache=True)
def _fill_costmap(grid, ranges, angles, max_range, side):
    n = grid.shape[0]
    scale = n / side
    half = 0.5 * side
    hits = np.empty((angles.shape[0], 2), dtype=np.int64)
    n_hits = 0
    for i in range(angles.shape[0]):
        dx = math.cos(angles[i])
        dy = math.sin(angles[i])
        r = ranges[i]
        # traverse in cell units from the window centre
        ox = half * scale
        oy = half * scale
        ix = int(math.floor(ox))
        iy = int(math.floor(oy))
        end = r * scale
        if dx > 0:
            sx = 1
            tmx = (ix + 1 - ox) / dx
            tdx = 1.0 / dx
        elif dx < 0:
            sx = -1
            tmx = (ix - ox) / dx
            tdx = -1.0 / dx
        else:
            sx = 0
            tmx = np.inf
            tdx = np.inf
        if dy > 0:
            sy = 1
            tmy = (iy + 1 - oy) / dy
            tdy = 1.0 / dy
        elif dy < 0:
            sy = -1
            tmy = (iy - oy) / dy
            tdy = -1.0 / dy
        else:
            sy = 0
            tmy = np.inf
            tdy = np.inf
        hx = int(math.floor((r * dx + half) * scale))
        hy = int(math.floor((r * dy + half) * scale))
        is_hit = r < max_range
        while 0 <= ix < n and 0 <= iy < n:
            if is_hit and ix == hx and iy == hy:
                break
            grid[ix, iy] = 0.0
            if min(tmx, tmy) >= end:
                break
            if tmx < tmy:
                ix += sx
                tmx += tdx
            else:
                iy += sy
                tmy += tdy
        if is_hit and 0 <= hx < n and 0 <= hy < n:
            hits[n_hits, 0] = hx
            hits[n_hits, 1] = hy
            n_hits += 1
    for k in range(n_hits):
        grid[hits[k, 0], hits[k, 1]] = 1.0
    return grid


def build_costmap(scan: LidarScan, cells_per_side: int = 60, side_m: float = 6.0,
                  unknown: float = UNKNOWN) -> Costmap:
    """Rasterise a scan: hit cells occupied, traversed cells free, the rest unknown."""
    if cells_per_side < 8:
        raise ValueError("cells_per_side must be >= 8")
    grid = np.full((cells_per_side, cells_per_side), unknown)
    _fill_costmap(grid, scan.ranges.astype(np.float64), scan.angles, float(scan.max_range),
                  float(side_m))
    return Costmap(values=grid, side_m=side_m)


def to_robot_frame(pose, point) -> np.ndarray:
    dx = point[0] - pose.x
    dy = point[1] - pose.y
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    return np.array([c * dx + s * dy, -s * dx + c * dy])


def to_world_frame(pose, point_rel) -> np.ndarray:
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    return np.array([pose.x + c * point_rel[0] - s * point_rel[1],
                     pose.y + s * point_rel[0] + c * point_rel[1]])


@dataclass(frozen=True)
class SensingConfig:
    n_rays: int = 360
    max_range: float = 6.0
    cells_per_side: int = 60
    side_m: float = 6.0
    unknown: float = UNKNOWN
    # "rays": sector minima fed to an MLP; "costmap": grayscale image for the conv encoder
    mode: str = "rays"
    n_sectors: int = 64

    def __post_init__(self):
        if self.mode not in ("rays", "costmap"):
            raise ValueError(f"unknown observation mode {self.mode!r}")


def assemble_observation(state: WorldState, scan: LidarScan, waypoint,
                         cfg: SensingConfig = SensingConfig(), carrot=None) -> Observation:
    waypoint = np.asarray(waypoint, dtype=np.float64)
    if not np.all(np.isfinite(waypoint)):
        raise ValueError("waypoint must be finite")
    rel = to_robot_frame(state.robot_pose, waypoint)
    costmap = None
    rays = None
    if cfg.mode == "costmap":
        costmap = build_costmap(scan, cfg.cells_per_side, cfg.side_m, cfg.unknown)
    else:
        rays = scan.sector_minima(cfg.n_sectors)
    carrot_rel = None if carrot is None else to_robot_frame(state.robot_pose,
                                                           np.asarray(carrot, dtype=np.float64))
    return Observation(costmap=costmap, velocity=state.robot_twist, waypoint_rel=rel, rays=rays,
                       carrot_rel=carrot_rel)
