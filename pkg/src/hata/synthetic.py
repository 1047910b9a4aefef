"""Seeded synthetic worlds for tests, demos and the directional benchmark."""

from __future__ import annotations

import math

import numpy as np

from .experiment import Scenario
from .grid import Cell, GridSpec
from .mod import build_layer, MoDStack, zero_stack
from .planner import OccupancyGrid, astar
from .trajectories import TimeWindow, Trajectory

CORRIDOR_RESOLUTION = 0.25
CORRIDOR_KERNEL = 2


def pick_cells(rng, grid: OccupancyGrid, n: int, box, spacing: float, avoid=()) -> list[Cell]:
    """``n`` free cells inside ``box = ((x0, x1), (y0, y1))``, pairwise at least ``spacing`` apart."""
    spec = grid.spec
    (x0, x1), (y0, y1) = box
    cells: list[Cell] = []
    for _ in range(10000):
        if len(cells) == n:
            break
        cell = spec.cell_of(rng.uniform(x0, x1), rng.uniform(y0, y1))
        if not spec.in_bounds(cell) or grid.blocked[cell]:
            continue
        p = np.array(spec.center(cell))
        if any(np.hypot(*(p - spec.center(c))) < spacing for c in cells):
            continue
        if any(np.hypot(*(p - q)) < spacing for q in avoid):
            continue
        cells.append(cell)
    if len(cells) < n:
        raise RuntimeError("could not place agents with the requested spacing")
    return cells


def _shuttle(pid: int, x: float, y_lo: float, y_hi: float, t_start: float, t_end: float, speed: float, phase: float):
    """Pedestrian pacing up and down the segment x = const between y_lo and y_hi."""
    span = y_hi - y_lo
    period = 2 * span / speed
    times = np.arange(t_start, t_end + 1e-9, 0.5)
    u = ((times - t_start) / period + phase) % 1.0
    y = np.where(u < 0.5, y_lo + 2 * u * span, y_hi - (2 * u - 1) * span)
    return Trajectory(pid, times, np.column_stack([np.full_like(times, x), y]))


def corridor_world() -> OccupancyGrid:
    """24 m x 14 m hall with a central block.

    The lower passage (y < 4 m) is the short route from the west side to the
    east side; the upper passage (y > 10 m) is the detour.
    """
    spec = GridSpec(0.0, 0.0, CORRIDOR_RESOLUTION, 96, 56)
    blocked = np.zeros(spec.shape, dtype=bool)
    res = spec.resolution
    blocked[int(4 / res) : int(10 / res), int(5 / res) : int(19 / res)] = True
    return OccupancyGrid(spec, blocked)


def pedestrian_wall(seed: int, t_start: float, t_end: float, n: int = 6, first_id: int = 0) -> list[Trajectory]:
    """Pedestrians pacing across the lower passage at x ~ 12 m, evenly out of phase."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        x = 12.0 + rng.uniform(-0.3, 0.3)
        speed = rng.uniform(0.9, 1.2)
        phase = (k + rng.uniform(-0.2, 0.2)) / n
        out.append(_shuttle(first_id + k, x, -0.3, 4.3, t_start, t_end, speed, phase))
    return out


def corridor_mods(seed: int = 12345, window: float = 1800.0) -> MoDStack:
    """MoD learned from a 'training day' on which the wall lasts the whole window."""
    grid = corridor_world()
    trajs = pedestrian_wall(seed, 0.0, window, n=8)
    layer = build_layer(trajs, TimeWindow(0.0, window), grid.spec, CORRIDOR_KERNEL)
    return MoDStack(grid.spec, (layer,), CORRIDOR_KERNEL)


def corridor_scenario(seed: int, n_robots: int = 3, mods: MoDStack | None = None, **overrides) -> Scenario:
    """Robots west, tasks east, and a pedestrian wall across the short route.

    The replayed wall lasts 20-60 s from mission start; robots that take the
    short route have to wait for it to clear.
    """
    rng = np.random.default_rng(seed)
    grid = corridor_world()
    mods = corridor_mods() if mods is None else mods
    robots = pick_cells(rng, grid, n_robots, ((0.5, 3.5), (0.5, 3.5)), 1.3)
    tasks = pick_cells(rng, grid, n_robots, ((20.5, 23.5), (0.5, 3.5)), 1.3)
    duration = rng.uniform(20.0, 60.0)
    peds = pedestrian_wall(int(rng.integers(1 << 31)), 0.0, duration, n=6, first_id=100)
    params = dict(grid=grid, robots=robots, tasks=tasks, mods=mods, pedestrians=tuple(peds), seed=seed)
    params.update(overrides)
    return Scenario(**params)


def random_world(rng: np.random.Generator, size: int = 40, resolution: float = 0.25, n_blocks: int = 4) -> OccupancyGrid:
    spec = GridSpec(0.0, 0.0, resolution, size, size)
    blocked = np.zeros(spec.shape, dtype=bool)
    for _ in range(n_blocks):
        h, w = rng.integers(2, size // 4, size=2)
        r, c = rng.integers(0, size - h), rng.integers(0, size - w)
        blocked[r : r + h, c : c + w] = True
    return OccupancyGrid(spec, blocked)


def _crossing(rng, pid: int, extent: float, t_lo: float, t_hi: float, avoid: np.ndarray, clearance: float):
    for _ in range(200):
        a, b = rng.uniform(0, extent, size=(2, 2))
        if np.hypot(*(b - a)) < extent / 3:
            continue
        speed = rng.uniform(0.8, 1.4)
        t0 = rng.uniform(t_lo, t_hi)
        dur = np.hypot(*(b - a)) / speed
        n = max(2, int(math.ceil(dur / 0.2)) + 1)
        s = np.linspace(0.0, 1.0, n)
        xy = a + s[:, None] * (b - a)
        if len(avoid):
            d = np.hypot(xy[:, None, 0] - avoid[None, :, 0], xy[:, None, 1] - avoid[None, :, 1])
            if d.min() < clearance:
                continue
        return Trajectory(pid, t0 + s * dur, xy)
    return None


def random_scenario(
    seed: int,
    n_robots: int | None = None,
    n_pedestrians: int | None = None,
    zero_crowd: bool = False,
    size: int = 40,
    **overrides,
) -> Scenario:
    """Random obstacles, robots, tasks and straight-walking pedestrians.

    Pedestrians keep clear of robot start cells (a robot waiting at its start
    cannot get out of the way of a walker that never yields).
    """
    rng = np.random.default_rng(seed)
    for _ in range(100):
        grid = random_world(rng, size)
        n = int(rng.integers(2, 6)) if n_robots is None else n_robots
        extent = grid.spec.width * grid.spec.resolution
        try:
            robots = pick_cells(rng, grid, n, ((0.2, extent - 0.2),) * 2, 1.4)
            tasks = pick_cells(rng, grid, n, ((0.2, extent - 0.2),) * 2, 1.4)
        except RuntimeError:
            continue
        free = ~grid.blocked
        if all(astar(free, r, t) is not None for r in robots for t in tasks):
            break
    else:  # pragma: no cover
        raise RuntimeError("could not generate a connected random scenario")
    starts = grid.spec.centers(robots)
    m = int(rng.integers(0, 6)) if n_pedestrians is None else n_pedestrians
    peds = []
    for k in range(m):
        t = _crossing(rng, 1000 + k, extent, 0.0, 20.0, starts, clearance=1.0)
        if t is not None:
            peds.append(t)
    if zero_crowd:
        mods = zero_stack(grid.spec, 0.0, 1800.0)
    else:
        train = [t for t in (_crossing(rng, 2000 + k, extent, 0.0, 100.0, np.empty((0, 2)), 0) for k in range(8)) if t]
        layer = build_layer(train, TimeWindow(0.0, 1800.0), grid.spec, 1)
        # stretch a sparse training day so the layer shows structure at desk scale
        p = np.clip(layer.grid * 18.0, 0.0, 1.0)
        mods = MoDStack(grid.spec, (type(layer)(layer.window, p),), 1)
    params = dict(grid=grid, robots=robots, tasks=tasks, mods=mods, pedestrians=tuple(peds), seed=seed)
    params.update(overrides)
    return Scenario(**params)
