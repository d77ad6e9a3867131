"""Grid A* over an inflated occupancy map, and waypoint extraction along the result."""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass

import numba
import numpy as np

from navguard.world.grid import OccupancyMap, nearest_occupied
from navguard.world.state import Pose

SQRT2 = math.sqrt(2.0)


class NoPath(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class GlobalPath:
    waypoints: np.ndarray
    resolution_m: float
    n_straight: int = 0
    n_diagonal: int = 0

    @property
    def cost(self) -> float:
        """Planner cost in meters (Euclidean length of the cell-centre chain)."""
        return (self.n_straight + self.n_diagonal * SQRT2) * self.resolution_m

    @property
    def arc_lengths(self) -> np.ndarray:
        seg = np.hypot(*np.diff(self.waypoints, axis=0).T)
        return np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length(self) -> float:
        return float(self.arc_lengths[-1])

    @property
    def goal(self) -> np.ndarray:
        return self.waypoints[-1]


@numba.njit(cache=True)
def _inflate(shape_h, shape_w, frontier, res, radius):
    out = np.zeros((shape_h, shape_w), dtype=np.bool_)
    for iy in range(shape_h):
        py = (iy + 0.5) * res
        for ix in range(shape_w):
            px = (ix + 0.5) * res
            best = np.inf
            for k in range(frontier.shape[0]):
                x0 = frontier[k, 0] * res
                y0 = frontier[k, 1] * res
                cx = min(max(px, x0), x0 + res)
                cy = min(max(py, y0), y0 + res)
                d = (px - cx) ** 2 + (py - cy) ** 2
                if d < best:
                    best = d
            out[iy, ix] = math.sqrt(best) < radius
    return out


def inflated_grid(occ_map: OccupancyMap, radius: float | None = None) -> np.ndarray:
    """Blocked mask: occupied cells plus cells whose centre lies closer than ``radius`` to one."""
    radius = occ_map.inflation_radius if radius is None else radius
    cache = occ_map.__dict__.setdefault("_inflation_cache", {})
    key = round(float(radius), 9)
    if key not in cache:
        blocked = _inflate(occ_map.height_cells, occ_map.width_cells, occ_map.frontier,
                           float(occ_map.resolution), float(radius))
        cache[key] = blocked | occ_map.cells
    return cache[key]


def _octile(ax, ay, bx, by):
    dx, dy = abs(ax - bx), abs(ay - by)
    return max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy)


def astar_cells(blocked: np.ndarray, start: tuple[int, int], goal: tuple[int, int]):
    """Shortest 8-connected cell path; returns the list of (ix, iy) or raises NoPath."""
    h, w = blocked.shape
    sx, sy = start
    gx, gy = goal
    if blocked[sy, sx] or blocked[gy, gx]:
        raise NoPath("start or goal lies in blocked space")
    g = np.full(h * w, np.inf)
    parent = np.full(h * w, -1, dtype=np.int64)
    closed = np.zeros(h * w, dtype=bool)
    s = sy * w + sx
    t = gy * w + gx
    g[s] = 0.0
    heap = [(_octile(sx, sy, gx, gy), 0.0, s)]
    blocked_l = blocked.tolist()
    while heap:
        _, gc, cur = heapq.heappop(heap)
        if closed[cur]:
            continue
        if cur == t:
            break
        closed[cur] = True
        cy, cx = divmod(cur, w)
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)):
            nx, ny = cx + dx, cy + dy
            if nx < 0 or ny < 0 or nx >= w or ny >= h or blocked_l[ny][nx]:
                continue
            diag = dx != 0 and dy != 0
            if diag and (blocked_l[cy][nx] or blocked_l[ny][cx]):
                continue
            nb = ny * w + nx
            if closed[nb]:
                continue
            ng = gc + (SQRT2 if diag else 1.0)
            if ng < g[nb]:
                g[nb] = ng
                parent[nb] = cur
                heapq.heappush(heap, (ng + _octile(nx, ny, gx, gy), ng, nb))
    else:
        raise NoPath("goal unreachable")
    if not np.isfinite(g[t]):
        raise NoPath("goal unreachable")
    cells = []
    cur = t
    while cur != -1:
        cy, cx = divmod(int(cur), w)
        cells.append((cx, cy))
        cur = parent[cur]
    return cells[::-1]


def nearest_free_cell(blocked: np.ndarray, start: tuple[int, int]) -> tuple[int, int]:
    """Breadth-first search for the closest unblocked cell (4-connected)."""
    h, w = blocked.shape
    if not blocked[start[1], start[0]]:
        return start
    seen = {start}
    q = deque([start])
    while q:
        x, y = q.popleft()
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h and (nx, ny) not in seen:
                if not blocked[ny, nx]:
                    return nx, ny
                seen.add((nx, ny))
                q.append((nx, ny))
    raise NoPath("map has no free cell")


def plan_global(occ_map: OccupancyMap, start, goal, snap_start: bool = False,
                inflation_radius: float | None = None) -> GlobalPath:
    """A* from ``start`` to ``goal`` (meters) on the inflated grid.

    The returned chain runs through cell centres, preceded by the exact start and
    followed by the exact goal. ``snap_start`` lets a robot that drifted into the
    inflated band plan from the nearest admissible cell.
    """
    blocked = inflated_grid(occ_map, inflation_radius)
    s = occ_map.cell_of(*start)
    g = occ_map.cell_of(*goal)
    for c in (s, g):
        if not occ_map.in_bounds(*c):
            raise NoPath("point outside the map")
    if snap_start:
        s = nearest_free_cell(blocked, s)
    cells = astar_cells(blocked, s, g)
    n_diag = sum(1 for a, b in zip(cells, cells[1:]) if a[0] != b[0] and a[1] != b[1])
    n_straight = len(cells) - 1 - n_diag
    pts = np.array([occ_map.cell_center(ix, iy) for ix, iy in cells], dtype=np.float64)
    # exact endpoints bracket the centre chain, each within half a cell diagonal of it
    pts = np.vstack([np.asarray(start, dtype=np.float64)[None], pts,
                     np.asarray(goal, dtype=np.float64)[None]])
    return GlobalPath(waypoints=pts, resolution_m=occ_map.resolution,
                      n_straight=n_straight, n_diagonal=n_diag)


def nearest_index(path: GlobalPath, x: float, y: float) -> int:
    d = np.hypot(path.waypoints[:, 0] - x, path.waypoints[:, 1] - y)
    return int(np.argmin(d))


def extract_waypoint_index(path: GlobalPath, robot: Pose, lookahead: float) -> int:
    s = path.arc_lengths
    k = nearest_index(path, robot.x, robot.y)
    ahead = np.nonzero(s >= s[k] + lookahead - 1e-12)[0]
    return int(ahead[0]) if ahead.size else len(s) - 1


def extract_waypoint(path: GlobalPath, robot: Pose, lookahead: float = 2.0) -> np.ndarray:
    """First path point at least ``lookahead`` of arc beyond the point nearest the robot."""
    if len(path.waypoints) == 0:
        raise ValueError("empty path")
    return path.waypoints[extract_waypoint_index(path, robot, lookahead)].copy()


def path_clearance(occ_map: OccupancyMap, path: GlobalPath) -> float:
    return min(nearest_occupied(occ_map, x, y)[0] for x, y in path.waypoints)
