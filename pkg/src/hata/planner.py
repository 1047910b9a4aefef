"""A* planning on an 8-connected grid that avoids crowded cells.

A cell is admissible when it is free in the static map and its MoD
probability (in the layer covering the request time) does not exceed the
threshold ``delta``. Diagonal moves need at least one admissible axial
neighbour. Step costs are counted as (axial, diagonal) integer pairs so path
lengths compare exactly.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .grid import Cell, GridSpec, read_pgm
from .mod import MoDStack

SQRT2 = math.sqrt(2.0)
FREE_THRESHOLD = 127  # pixels above this are free

_MOVES = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


class Unreachable(Exception):
    """No admissible path.

    ``reason`` is ``"static"`` when the static map alone separates start and
    goal and ``"delta"`` when only the crowd threshold does (including a start
    or goal cell that itself exceeds the threshold).
    """

    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    spec: GridSpec
    blocked: np.ndarray

    def __post_init__(self):
        blocked = np.array(self.blocked, dtype=bool)
        if blocked.shape != self.spec.shape:
            raise ValueError(f"blocked mask shape {blocked.shape} != grid shape {self.spec.shape}")
        blocked.setflags(write=False)
        object.__setattr__(self, "blocked", blocked)

    @classmethod
    def free(cls, spec: GridSpec) -> "OccupancyGrid":
        return cls(spec, np.zeros(spec.shape, dtype=bool))

    def check_pairing(self, mods: MoDStack) -> None:
        if mods.spec != self.spec:
            raise ValueError(f"MoD grid {mods.spec} does not match static map grid {self.spec}")

    def inflate(self, radius: float) -> "OccupancyGrid":
        """Grow obstacles by ``radius`` meters (point-robot configuration space)."""
        cells = int(math.floor(radius / self.spec.resolution + 1e-9))
        if cells <= 0:
            return self
        from scipy.ndimage import binary_dilation

        d = np.arange(-cells, cells + 1)
        disk = (d[:, None] ** 2 + d[None, :] ** 2) <= cells * cells
        return OccupancyGrid(self.spec, binary_dilation(self.blocked, structure=disk))


def load_static_map(pgm_path: str | Path, spec_path: str | Path) -> OccupancyGrid:
    with open(spec_path) as f:
        spec = GridSpec.from_dict(yaml.safe_load(f))
    image = read_pgm(pgm_path)
    if image.shape != spec.shape:
        raise ValueError(f"{pgm_path}: image {image.shape} does not match grid spec {spec.shape}")
    return OccupancyGrid(spec, image <= FREE_THRESHOLD)


def save_static_map(grid: OccupancyGrid, pgm_path: str | Path, spec_path: str | Path) -> None:
    from .grid import write_pgm

    write_pgm(pgm_path, np.where(grid.blocked, 0, 255).astype(np.uint8))
    Path(spec_path).write_text(json.dumps(grid.spec.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class PlanRequest:
    start: Cell
    goal: Cell
    delta: float = 1.0
    time: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")


@dataclass(frozen=True)
class GridPath:
    cells: tuple[Cell, ...]
    resolution: float
    n_axial: int = 0
    n_diagonal: int = 0
    length: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(tuple(int(v) for v in c) for c in self.cells))
        object.__setattr__(self, "length", self.resolution * step_length(self.n_axial, self.n_diagonal))

    @classmethod
    def from_cells(cls, cells, resolution: float) -> "GridPath":
        cells = [tuple(c) for c in cells]
        axial = diagonal = 0
        for (r0, c0), (r1, c1) in zip(cells, cells[1:]):
            dr, dc = abs(r1 - r0), abs(c1 - c0)
            if max(dr, dc) != 1:
                raise ValueError(f"cells {(r0, c0)} and {(r1, c1)} are not 8-neighbours")
            if dr and dc:
                diagonal += 1
            else:
                axial += 1
        return cls(tuple(cells), resolution, axial, diagonal)

    @property
    def steps(self) -> tuple[int, int]:
        return (self.n_axial, self.n_diagonal)

    def points(self, spec: GridSpec) -> np.ndarray:
        return spec.centers(self.cells)


def step_length(n_axial: int, n_diagonal: int) -> float:
    return n_axial + n_diagonal * SQRT2


def octile(a: Cell, b: Cell) -> float:
    dr, dc = abs(a[0] - b[0]), abs(a[1] - b[1])
    return step_length(abs(dr - dc), min(dr, dc))


def admissible_mask(grid: OccupancyGrid, mods: MoDStack | None, delta: float, time: float) -> np.ndarray:
    free = ~grid.blocked
    if mods is None:
        return free.copy()
    grid.check_pairing(mods)
    return free & (mods.layer_at(time) <= delta)


def astar(admissible: np.ndarray, start: Cell, goal: Cell) -> tuple[list[Cell], int, int] | None:
    """Shortest admissible path as ``(cells, n_axial, n_diagonal)`` or ``None``.

    Ties on f prefer larger g, then row-major cell order.
    """
    adm = admissible.tolist()
    h, w = admissible.shape
    best: dict[Cell, tuple[int, int]] = {start: (0, 0)}
    parent: dict[Cell, Cell] = {}
    closed = set()
    heap = [(octile(start, goal), -0.0, start[0], start[1])]
    while heap:
        _, _, r, c = heapq.heappop(heap)
        cell = (r, c)
        if cell in closed:
            continue
        closed.add(cell)
        if cell == goal:
            path = [cell]
            while path[-1] in parent:
                path.append(parent[path[-1]])
            a, d = best[goal]
            return path[::-1], a, d
        a, d = best[cell]
        for dr, dc in _MOVES:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < h and 0 <= nc < w) or not adm[nr][nc]:
                continue
            diag = dr != 0 and dc != 0
            if diag and not (adm[r][nc] or adm[nr][c]):
                continue
            nxt = (nr, nc)
            if nxt in closed:
                continue
            na, nd = (a, d + 1) if diag else (a + 1, d)
            g = step_length(na, nd)
            old = best.get(nxt)
            if old is not None and step_length(*old) <= g:
                continue
            best[nxt] = (na, nd)
            parent[nxt] = cell
            heapq.heappush(heap, (g + octile(nxt, goal), -g, nr, nc))
    return None


def plan(grid: OccupancyGrid, mods: MoDStack | None, req: PlanRequest) -> GridPath:
    spec = grid.spec
    for name, cell in (("start", req.start), ("goal", req.goal)):
        if not spec.in_bounds(cell):
            raise ValueError(f"{name} {cell} is outside the grid")
        if grid.blocked[cell]:
            raise ValueError(f"{name} {cell} is a static obstacle")
    adm = admissible_mask(grid, mods, req.delta, req.time)
    for name, cell in (("start", req.start), ("goal", req.goal)):
        if not adm[cell]:
            raise Unreachable("delta", f"{name} {cell} exceeds crowd threshold {req.delta}")
    found = astar(adm, tuple(req.start), tuple(req.goal))
    if found is None:
        if mods is not None and astar(~grid.blocked, tuple(req.start), tuple(req.goal)) is not None:
            raise Unreachable("delta", f"{req.start} -> {req.goal} blocked by crowd threshold {req.delta}")
        raise Unreachable("static", f"{req.start} -> {req.goal} separated by static obstacles")
    cells, a, d = found
    return GridPath(tuple(cells), spec.resolution, a, d)


def plan_matrix(
    grid: OccupancyGrid,
    mods: MoDStack | None,
    robots: list[Cell],
    tasks: list[Cell],
    delta: float = 1.0,
    time: float = 0.0,
) -> list[list[GridPath | Unreachable]]:
    """Plan every robot to every task; failed pairs hold their :class:`Unreachable`."""
    if len(robots) != len(tasks):
        raise ValueError("plan_matrix needs as many tasks as robots")
    out = []
    for r in robots:
        row = []
        for t in tasks:
            try:
                row.append(plan(grid, mods, PlanRequest(tuple(r), tuple(t), delta, time)))
            except Unreachable as exc:
                row.append(exc)
        out.append(row)
    return out
