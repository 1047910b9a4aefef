"""Robot-to-task bids: weighted path length plus expected human encounters."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import Cell, GridSpec
from .mod import MoDStack
from .planner import GridPath, OccupancyGrid, Unreachable, plan_matrix


@dataclass(frozen=True)
class Weights:
    w0: float = 1.0  # per meter of path
    w1: float = 1.0  # per expected encounter

    def __post_init__(self):
        if self.w0 < 0 or self.w1 < 0:
            raise ValueError("weights must be non-negative")
        if self.w0 == 0 and self.w1 == 0:
            raise ValueError("weights must not both be zero")


TUNED_WEIGHTS = Weights(1.15, 0.95)


@dataclass(frozen=True, eq=False)
class CostMatrix:
    values: np.ndarray
    unreachable: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        mask = np.array(self.unreachable, dtype=bool)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError("cost matrix must be square")
        if mask.shape != values.shape:
            raise ValueError("mask shape mismatch")
        ok = values[~mask]
        if not np.all(np.isfinite(ok)) or np.any(ok < 0):
            raise ValueError("reachable costs must be finite and non-negative")
        values[mask] = np.inf
        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "unreachable", mask)

    @classmethod
    def dense(cls, values) -> "CostMatrix":
        values = np.asarray(values, dtype=float)
        return cls(values, ~np.isfinite(values))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        for i in range(self.n):
            w.writerow(["" if self.unreachable[i, j] else repr(float(self.values[i, j])) for j in range(self.n)])
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CostMatrix":
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        values = np.array([[math.inf if v == "" else float(v) for v in r] for r in rows])
        return cls.dense(values)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv())


def path_encounters(path: GridPath, mods: MoDStack, time: float, rng: np.random.Generator | None = None) -> float:
    """Sum of the encounter variable over segment end cells.

    With ``rng`` each encounter is a Bernoulli draw; otherwise its expectation
    (the cell's MoD probability) is used.
    """
    if len(path.cells) < 2:
        return 0.0
    layer = mods.layer_at(time)
    idx = np.array(path.cells[1:])
    p = layer[idx[:, 0], idx[:, 1]]
    if rng is not None:
        return float((rng.random(len(p)) < p).sum())
    return float(p.sum())


def path_cost(path: GridPath, mods: MoDStack, time: float, w: Weights, rng: np.random.Generator | None = None) -> float:
    return w.w0 * path.length + w.w1 * path_encounters(path, mods, time, rng)


def cost_matrix(
    paths: list[list[GridPath | Unreachable]],
    mods: MoDStack,
    time: float,
    w: Weights,
    rng: np.random.Generator | None = None,
) -> CostMatrix:
    n = len(paths)
    values = np.zeros((n, n))
    mask = np.zeros((n, n), dtype=bool)
    for i, row in enumerate(paths):
        if len(row) != n:
            raise ValueError("path matrix must be square")
        for j, p in enumerate(row):
            if isinstance(p, GridPath):
                values[i, j] = path_cost(p, mods, time, w, rng)
            else:
                mask[i, j] = True
    return CostMatrix(values, mask)


def euclidean_costs(spec: GridSpec, robots: list[Cell], tasks: list[Cell]) -> CostMatrix:
    a = spec.centers(robots)
    b = spec.centers(tasks)
    d = np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])
    return CostMatrix(d, np.zeros(d.shape, dtype=bool))


def length_costs(paths: list[list[GridPath | Unreachable]]) -> CostMatrix:
    n = len(paths)
    values = np.zeros((n, n))
    mask = np.zeros((n, n), dtype=bool)
    for i, row in enumerate(paths):
        for j, p in enumerate(row):
            if isinstance(p, GridPath):
                values[i, j] = p.length
            else:
                mask[i, j] = True
    return CostMatrix(values, mask)


def baseline_costs(robots: list[Cell], tasks: list[Cell], grid: OccupancyGrid, mode: str = "path_length") -> CostMatrix:
    """Crowd-agnostic bids: straight-line meters or static-map path length."""
    if len(robots) != len(tasks):
        raise ValueError("baseline costs need as many tasks as robots")
    if mode == "euclidean":
        return euclidean_costs(grid.spec, robots, tasks)
    if mode == "path_length":
        return length_costs(plan_matrix(grid, None, robots, tasks, delta=1.0))
    raise ValueError(f"unknown baseline mode {mode!r}; expected 'euclidean' or 'path_length'")
