"""Static occupancy maps, the ASCII map format, and the geometric kernels over them.

Cell ``(ix, iy)`` covers ``[ix*res, (ix+1)*res) x [iy*res, (iy+1)*res)`` in world
meters; ``cells[iy, ix]`` is True when occupied. In map files the first grid
row is the top of the map (largest ``iy``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numba
import numpy as np
import yaml


class MapFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class OccupancyMap:
    cells: np.ndarray
    resolution: float
    inflation_radius: float = 0.4
    rooms: dict[str, tuple[int, int, int, int]] = field(default_factory=dict)
    name: str = "map"

    def __post_init__(self):
        cells = np.ascontiguousarray(self.cells, dtype=bool)
        object.__setattr__(self, "cells", cells)
        if cells.ndim != 2 or cells.size == 0:
            raise MapFormatError("cells must be a non-empty 2D grid")
        if not self.resolution > 0:
            raise MapFormatError("resolution must be positive")
        border = np.concatenate([cells[0], cells[-1], cells[:, 0], cells[:, -1]])
        if not border.all():
            raise MapFormatError("boundary cells must be occupied (closed world)")
        for name, (x0, y0, x1, y1) in self.rooms.items():
            if not (0 <= x0 <= x1 < self.width_cells and 0 <= y0 <= y1 < self.height_cells):
                raise MapFormatError(f"room {name!r} lies outside the grid")

    @property
    def width_cells(self) -> int:
        return self.cells.shape[1]

    @property
    def height_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def size_m(self) -> tuple[float, float]:
        return self.width_cells * self.resolution, self.height_cells * self.resolution

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        inv = 1.0 / self.resolution
        return int(math.floor(x * inv)), int(math.floor(y * inv))

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        return (ix + 0.5) * self.resolution, (iy + 0.5) * self.resolution

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width_cells and 0 <= iy < self.height_cells

    @cached_property
    def cells_u8(self) -> np.ndarray:
        return self.cells.astype(np.uint8)

    @cached_property
    def frontier(self) -> np.ndarray:
        """Occupied cells with at least one free 4-neighbour, as an (n, 2) int array of (ix, iy).

        The nearest occupied cell to any free point is always a frontier cell.
        """
        occ = self.cells
        padded = np.pad(occ, 1, constant_values=True)
        free_nb = (~padded[:-2, 1:-1]) | (~padded[2:, 1:-1]) | (~padded[1:-1, :-2]) | (~padded[1:-1, 2:])
        iy, ix = np.nonzero(occ & free_nb)
        return np.ascontiguousarray(np.stack([ix, iy], axis=1).astype(np.int64))

    def occupied_indices(self) -> np.ndarray:
        iy, ix = np.nonzero(self.cells)
        return np.stack([ix, iy], axis=1)

    def room_cells(self, name: str) -> tuple[int, int, int, int]:
        try:
            return self.rooms[name]
        except KeyError:
            raise KeyError(f"unknown room {name!r} in map {self.name!r}") from None

    def to_text(self) -> str:
        header = {"resolution": self.resolution, "inflation_radius": self.inflation_radius,
                  "rooms": {k: list(v) for k, v in self.rooms.items()}}
        rows = ["".join("#" if c else "." for c in row) for row in self.cells[::-1]]
        return yaml.safe_dump(header, sort_keys=True, default_flow_style=None) + "---\n" + "\n".join(rows) + "\n"


def parse_map(text: str, name: str = "map") -> OccupancyMap:
    """Parse the ASCII map format: a YAML header, a ``---`` line, then ``#``/``.`` rows."""
    head, sep, body = text.partition("\n---\n")
    if not sep:
        raise MapFormatError("map text lacks the '---' header separator")
    header = yaml.safe_load(head) or {}
    rows = [line.rstrip() for line in body.splitlines() if line.strip()]
    if not rows:
        raise MapFormatError("map has no grid rows")
    if len({len(r) for r in rows}) != 1:
        raise MapFormatError("grid rows have unequal lengths")
    bad = set("".join(rows)) - {"#", "."}
    if bad:
        raise MapFormatError(f"unexpected grid characters {sorted(bad)}")
    cells = np.array([[c == "#" for c in row] for row in rows[::-1]], dtype=bool)
    rooms = {str(k): tuple(int(v) for v in rect) for k, rect in (header.get("rooms") or {}).items()}
    try:
        resolution = float(header["resolution"])
    except KeyError:
        raise MapFormatError("map header must give a resolution") from None
    return OccupancyMap(cells=cells, resolution=resolution,
                        inflation_radius=float(header.get("inflation_radius", 0.4)),
                        rooms=rooms, name=name)


def load_map(path: str | Path) -> OccupancyMap:
    path = Path(path)
    return parse_map(path.read_text(), name=path.stem)


def walled_room(width_m: float, height_m: float, resolution: float = 0.1,
                pillars: list[tuple[float, float, float, float]] | None = None) -> OccupancyMap:
    """An empty rectangular room whose interior is exactly ``width_m`` x ``height_m``.

    The walls are a one-cell ring outside the interior, so the interior spans
    ``[res, res + width_m] x [res, res + height_m]``. ``pillars`` are extra
    occupied rectangles ``(x0, y0, x1, y1)`` in meters.
    """
    nx = int(round(width_m / resolution)) + 2
    ny = int(round(height_m / resolution)) + 2
    cells = np.zeros((ny, nx), dtype=bool)
    cells[0, :] = cells[-1, :] = True
    cells[:, 0] = cells[:, -1] = True
    for x0, y0, x1, y1 in pillars or []:
        ix0, iy0 = int(math.floor(x0 / resolution + 1e-9)), int(math.floor(y0 / resolution + 1e-9))
        ix1, iy1 = int(math.ceil(x1 / resolution - 1e-9)), int(math.ceil(y1 / resolution - 1e-9))
        cells[iy0:iy1, ix0:ix1] = True
    return OccupancyMap(cells=cells, resolution=resolution)


# ---------------------------------------------------------------------------
# kernels

@numba.njit(cache=True)
def _nearest_frontier(px, py, frontier, res):
    best = np.inf
    qx = px
    qy = py
    for k in range(frontier.shape[0]):
        x0 = frontier[k, 0] * res
        y0 = frontier[k, 1] * res
        cx = min(max(px, x0), x0 + res)
        cy = min(max(py, y0), y0 + res)
        d = math.hypot(px - cx, py - cy)
        if d < best:
            best = d
            qx = cx
            qy = cy
    return best, qx, qy


def nearest_occupied(occ_map: OccupancyMap, x: float, y: float) -> tuple[float, float, float]:
    """Exact distance from a point to the union of occupied cell squares, and the closest point."""
    ix, iy = occ_map.cell_of(x, y)
    if not occ_map.in_bounds(ix, iy) or occ_map.cells[iy, ix]:
        return 0.0, x, y
    frontier = occ_map.frontier
    if frontier.shape[0] == 0:
        return math.inf, x, y
    return _nearest_frontier(float(x), float(y), frontier, float(occ_map.resolution))


@numba.njit(cache=True)
def _raycast_grid(cells, res, ox, oy, angles, max_range):
    """Amanatides-Woo traversal; returns the distance to the first occupied cell boundary."""
    h, w = cells.shape
    out = np.empty(angles.shape[0])
    inv = 1.0 / res
    ix0 = int(math.floor(ox * inv))
    iy0 = int(math.floor(oy * inv))
    for i in range(angles.shape[0]):
        if ix0 < 0 or iy0 < 0 or ix0 >= w or iy0 >= h or cells[iy0, ix0]:
            out[i] = 0.0
            continue
        dx = math.cos(angles[i])
        dy = math.sin(angles[i])
        ix = ix0
        iy = iy0
        if dx > 0:
            sx = 1
            tmx = ((ix + 1) * res - ox) / dx
            tdx = res / dx
        elif dx < 0:
            sx = -1
            tmx = (ix * res - ox) / dx
            tdx = -res / dx
        else:
            sx = 0
            tmx = np.inf
            tdx = np.inf
        if dy > 0:
            sy = 1
            tmy = ((iy + 1) * res - oy) / dy
            tdy = res / dy
        elif dy < 0:
            sy = -1
            tmy = (iy * res - oy) / dy
            tdy = -res / dy
        else:
            sy = 0
            tmy = np.inf
            tdy = np.inf
        r = max_range
        while True:
            if tmx < tmy:
                t = tmx
                ix += sx
                tmx += tdx
            else:
                t = tmy
                iy += sy
                tmy += tdy
            if t >= max_range:
                break
            if ix < 0 or iy < 0 or ix >= w or iy >= h or cells[iy, ix]:
                r = t
                break
        out[i] = r
    return out


def raycast_grid(occ_map: OccupancyMap, x: float, y: float, angles: np.ndarray,
                 max_range: float) -> np.ndarray:
    return _raycast_grid(occ_map.cells_u8, float(occ_map.resolution), float(x), float(y),
                         np.ascontiguousarray(angles, dtype=np.float64), float(max_range))


def disc_hits_cells(occ_map: OccupancyMap, x: float, y: float, radius: float) -> bool:
    """True when a disc overlaps any occupied cell (touching counts as no overlap)."""
    d, _, _ = nearest_occupied(occ_map, x, y)
    return d < radius
