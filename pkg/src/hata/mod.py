"""Time-windowed occupancy Maps of Dynamics (MoDs).

Each layer stores, per grid cell, the fraction of its time window during
which at least one pedestrian footprint covered the cell. Pedestrians are
interpolated linearly between samples and their footprint is a disk of
``kernel_radius`` cells around the cell they stand in. Presence intervals of
different pedestrians are merged before measuring, so co-located people are
not double counted.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import Cell, GridSpec, read_pgm, write_pgm
from .trajectories import TimeWindow, Trajectory, clip_to_window

log = logging.getLogger(__name__)

DEFAULT_WINDOW = 1800.0
DEFAULT_KERNEL_RADIUS = 10
PGM_MAX = 65535


class MoDLookupError(LookupError):
    pass


@dataclass(frozen=True, eq=False)
class MoDLayer:
    window: TimeWindow
    grid: np.ndarray

    def __post_init__(self):
        grid = np.array(self.grid, dtype=float)
        if grid.ndim != 2:
            raise ValueError("layer grid must be 2-D")
        if np.any(grid < 0) or np.any(grid > 1):
            raise ValueError("layer probabilities must lie in [0, 1]")
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)


@dataclass(frozen=True, eq=False)
class MoDStack:
    spec: GridSpec
    layers: tuple[MoDLayer, ...]
    kernel_radius: int

    def __post_init__(self):
        layers = tuple(self.layers)
        for layer in layers:
            if layer.grid.shape != self.spec.shape:
                raise ValueError("layer shape does not match grid spec")
        for a, b in zip(layers, layers[1:]):
            if b.window.start < a.window.end:
                raise ValueError("layers overlap or are out of order")
        object.__setattr__(self, "layers", layers)

    @property
    def start(self) -> float:
        return self.layers[0].window.start

    @property
    def end(self) -> float:
        return self.layers[-1].window.end

    def layer_index(self, time: float) -> int:
        for i, layer in enumerate(self.layers):
            if layer.window.contains(time):
                return i
        raise MoDLookupError(f"time {time} is outside every MoD layer")

    def layer_at(self, time: float) -> np.ndarray:
        return self.layers[self.layer_index(time)].grid


def kernel_offsets(radius: int) -> np.ndarray:
    """Cell offsets ``(drow, dcol)`` whose centers lie within ``radius`` cells."""
    r = int(radius)
    d = np.arange(-r, r + 1)
    dr, dc = np.meshgrid(d, d, indexing="ij")
    mask = dr**2 + dc**2 <= r * r
    return np.column_stack([dr[mask], dc[mask]])


def _pieces(traj: Trajectory, spec: GridSpec):
    """Split the piecewise-linear track into maximal single-cell time pieces."""
    res = spec.resolution
    gx = (traj.xy[:, 0] - spec.origin_x) / res
    gy = (traj.xy[:, 1] - spec.origin_y) / res
    times = traj.times
    rows, cols, t0s, t1s = [], [], [], []
    for i in range(len(times) - 1):
        ta, tb = float(times[i]), float(times[i + 1])
        x0, x1, y0, y1 = float(gx[i]), float(gx[i + 1]), float(gy[i]), float(gy[i + 1])
        cuts = [0.0, 1.0]
        for a, b in ((x0, x1), (y0, y1)):
            if a == b:
                continue
            lo, hi = min(a, b), max(a, b)
            for k in range(math.floor(lo) + 1, math.ceil(hi)):
                cuts.append((k - a) / (b - a))
        cuts.sort()
        for s0, s1 in zip(cuts, cuts[1:]):
            if s1 <= s0:
                continue
            sm = 0.5 * (s0 + s1)
            r = math.floor(y0 + sm * (y1 - y0))
            c = math.floor(x0 + sm * (x1 - x0))
            t0 = ta + s0 * (tb - ta)
            t1 = tb if s1 == 1.0 else ta + s1 * (tb - ta)
            if rows and rows[-1] == r and cols[-1] == c and t1s[-1] == t0:
                t1s[-1] = t1
            else:
                rows.append(r)
                cols.append(c)
                t0s.append(t0)
                t1s.append(t1)
    return np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64), np.array(t0s), np.array(t1s)


def _dwell_arrays(traj: Trajectory, spec: GridSpec, kernel_radius: int):
    """Flat cell index and ``[t0, t1)`` of every footprint-covered piece."""
    rows, cols, t0, t1 = _pieces(traj, spec)
    inside = (rows >= 0) & (rows < spec.height) & (cols >= 0) & (cols < spec.width)
    if not inside.all():
        log.debug("person %s: %d of %d pieces outside the grid", traj.person_id, (~inside).sum(), len(rows))
    rows, cols, t0, t1 = rows[inside], cols[inside], t0[inside], t1[inside]
    off = kernel_offsets(kernel_radius)
    kr = (rows[:, None] + off[None, :, 0]).ravel()
    kc = (cols[:, None] + off[None, :, 1]).ravel()
    kt0 = np.repeat(t0, len(off))
    kt1 = np.repeat(t1, len(off))
    ok = (kr >= 0) & (kr < spec.height) & (kc >= 0) & (kc < spec.width)
    return kr[ok] * spec.width + kc[ok], kt0[ok], kt1[ok]


def _union_lengths(flat: np.ndarray, t0: np.ndarray, t1: np.ndarray, ncells: int) -> np.ndarray:
    """Per-cell length of the union of the given intervals (event sweep)."""
    out = np.zeros(ncells)
    if len(flat) == 0:
        return out
    cell = np.concatenate([flat, flat])
    times = np.concatenate([t0, t1])
    delta = np.concatenate([np.ones(len(t0), np.int64), -np.ones(len(t1), np.int64)])
    order = np.lexsort((delta, times, cell))
    cell, times, delta = cell[order], times[order], delta[order]
    # per-cell deltas sum to zero, so a global running count is per-cell exact
    count = np.cumsum(delta)
    covered = (count[:-1] > 0) & (cell[:-1] == cell[1:])
    np.add.at(out, cell[:-1][covered], times[1:][covered] - times[:-1][covered])
    return out


def rasterize_dwell(
    traj: Trajectory, spec: GridSpec, kernel_radius: int = DEFAULT_KERNEL_RADIUS
) -> dict[Cell, list[tuple[float, float]]]:
    """Occupancy intervals per covered cell for one (already clipped) track."""
    flat, t0, t1 = _dwell_arrays(traj, spec, kernel_radius)
    order = np.lexsort((t0, flat))
    out: dict[Cell, list[tuple[float, float]]] = {}
    for f, a, b in zip(flat[order], t0[order], t1[order]):
        cell = (int(f) // spec.width, int(f) % spec.width)
        spans = out.setdefault(cell, [])
        if spans and a <= spans[-1][1]:
            spans[-1] = (spans[-1][0], max(spans[-1][1], float(b)))
        else:
            spans.append((float(a), float(b)))
    return out


def build_layer(
    trajs: list[Trajectory],
    window: TimeWindow,
    spec: GridSpec,
    kernel_radius: int = DEFAULT_KERNEL_RADIUS,
) -> MoDLayer:
    parts = []
    for traj in trajs:
        clipped = clip_to_window(traj, window)
        if clipped is not None:
            parts.append(_dwell_arrays(clipped, spec, kernel_radius))
    ncells = spec.width * spec.height
    if parts:
        flat, t0, t1 = (np.concatenate(x) for x in zip(*parts))
        lengths = _union_lengths(flat, t0, t1, ncells)
    else:
        lengths = np.zeros(ncells)
    p = np.clip(lengths / window.duration, 0.0, 1.0)
    return MoDLayer(window, p.reshape(spec.shape))


def stack_windows(day_start: float, day_end: float, window: float) -> list[TimeWindow]:
    if not day_end > day_start:
        raise ValueError("day_end must be after day_start")
    if not window > 0:
        raise ValueError("window length must be positive")
    n = math.ceil((day_end - day_start) / window - 1e-9)
    out = []
    for i in range(n):
        start = day_start + i * window
        out.append(TimeWindow(start, min(window, day_end - start)))
    return out


def build_stack(
    trajs: list[Trajectory],
    day_start: float,
    day_end: float,
    window: float = DEFAULT_WINDOW,
    spec: GridSpec | None = None,
    kernel_radius: int = DEFAULT_KERNEL_RADIUS,
) -> MoDStack:
    if spec is None:
        raise ValueError("a grid spec is required")
    layers = [build_layer(trajs, w, spec, kernel_radius) for w in stack_windows(day_start, day_end, window)]
    return MoDStack(spec, tuple(layers), kernel_radius)


def query(stack: MoDStack, cell: Cell, time: float) -> float:
    if not stack.spec.in_bounds(cell):
        raise MoDLookupError(f"cell {cell} is outside the grid")
    return float(stack.layer_at(time)[cell])


def zero_stack(spec: GridSpec, start: float, end: float, window: float = DEFAULT_WINDOW, kernel_radius: int = 0):
    layers = [MoDLayer(w, np.zeros(spec.shape)) for w in stack_windows(start, end, window)]
    return MoDStack(spec, tuple(layers), kernel_radius)


def export_stack(stack: MoDStack, directory: str | Path) -> Path:
    """Write one 16-bit PGM per layer plus ``mods.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, layer in enumerate(stack.layers):
        name = f"layer_{i:03d}.pgm"
        q = np.rint(layer.grid * PGM_MAX).astype(np.uint16)
        write_pgm(directory / name, q)
        entries.append({"file": name, "start": layer.window.start, "duration": layer.window.duration})
    meta = {
        "version": 1,
        "grid": stack.spec.to_dict(),
        "kernel_radius": stack.kernel_radius,
        "layers": entries,
    }
    path = directory / "mods.json"
    path.write_text(json.dumps(meta, indent=2) + "\n")
    return path


def import_stack(directory: str | Path) -> MoDStack:
    directory = Path(directory)
    meta = json.loads((directory / "mods.json").read_text())
    spec = GridSpec.from_dict(meta["grid"])
    layers = []
    for entry in meta["layers"]:
        q = read_pgm(directory / entry["file"])
        layers.append(MoDLayer(TimeWindow(entry["start"], entry["duration"]), q / PGM_MAX))
    return MoDStack(spec, tuple(layers), int(meta["kernel_radius"]))
