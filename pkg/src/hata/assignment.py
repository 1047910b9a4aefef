"""Robot-task assignment: min-sum (Hungarian) and min-max (bottleneck).

Among optimal assignments the lexicographically smallest permutation is
returned. Unreachable pairs are replaced by a finite sentinel larger than
``n * max finite cost``, so any matching that uses one is worse than every
fully feasible matching.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .cost import CostMatrix

OBJECTIVES = ("sum", "minmax")


class InfeasibleAssignment(ValueError):
    pass


@dataclass(frozen=True)
class Assignment:
    mapping: tuple[int, ...]  # mapping[robot] = task
    objective_sum: float
    objective_max: float

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return list(enumerate(self.mapping))

    def to_csv(self, costs: CostMatrix) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["robot_index", "task_index", "pair_cost"])
        for i, j in self.pairs:
            w.writerow([i, j, repr(float(costs.values[i, j]))])
        w.writerow([f"# objective_sum={self.objective_sum!r} objective_max={self.objective_max!r}"])
        return out.getvalue()


def _check_square(costs: CostMatrix) -> None:
    v = costs.values
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ValueError("assignment needs a square cost matrix")


def _check_rows_cols(costs: CostMatrix) -> None:
    mask = costs.unreachable
    for i in np.flatnonzero(mask.all(axis=1)):
        raise InfeasibleAssignment(f"robot row {i} has no reachable task")
    for j in np.flatnonzero(mask.all(axis=0)):
        raise InfeasibleAssignment(f"task column {j} is unreachable from every robot")


def _sentinel_matrix(costs: CostMatrix) -> np.ndarray:
    v = costs.values.copy()
    finite = v[~costs.unreachable]
    top = float(finite.max()) if finite.size else 0.0
    v[costs.unreachable] = costs.n * max(top, 1.0) * 2.0 + 1.0
    return v


def _min_sum(v: np.ndarray) -> float:
    r, c = linear_sum_assignment(v)
    return float(v[r, c].sum())


def _lex_smallest(v: np.ndarray, optimum: float) -> tuple[int, ...]:
    """Lexicographically smallest permutation whose sum is within tolerance of ``optimum``."""
    n = v.shape[0]
    tol = 1e-9 * max(1.0, abs(optimum))
    rows = list(range(n))
    cols = list(range(n))
    mapping = []
    fixed = 0.0
    for i in range(n):
        rest_rows = rows[i + 1 :]
        for j in sorted(cols):
            rest_cols = [c for c in cols if c != j]
            rest = _min_sum(v[np.ix_(rest_rows, rest_cols)]) if rest_rows else 0.0
            if fixed + v[i, j] + rest <= optimum + tol:
                mapping.append(j)
                fixed += v[i, j]
                cols.remove(j)
                break
        else:  # pragma: no cover - unreachable with a correct optimum
            raise RuntimeError("tie-breaking failed to reproduce the optimum")
    return tuple(mapping)


def _result(costs: CostMatrix, mapping: tuple[int, ...]) -> Assignment:
    picked = costs.values[np.arange(costs.n), list(mapping)]
    if np.any(costs.unreachable[np.arange(costs.n), list(mapping)]):
        bad = [i for i, j in enumerate(mapping) if costs.unreachable[i, j]]
        raise InfeasibleAssignment(f"no feasible perfect matching; robots {bad} would need unreachable tasks")
    return Assignment(mapping, float(picked.sum()), float(picked.max()) if len(picked) else 0.0)


def hungarian(costs: CostMatrix) -> Assignment:
    _check_square(costs)
    if costs.n == 0:
        return Assignment((), 0.0, 0.0)
    _check_rows_cols(costs)
    v = _sentinel_matrix(costs)
    return _result(costs, _lex_smallest(v, _min_sum(v)))


def _has_perfect_matching(allowed: np.ndarray) -> bool:
    match = maximum_bipartite_matching(csr_matrix(allowed.astype(np.int8)), perm_type="column")
    return bool(np.all(match >= 0))


def bottleneck(costs: CostMatrix) -> Assignment:
    """Minimise the largest assigned cost; ties broken by smaller sum."""
    _check_square(costs)
    if costs.n == 0:
        return Assignment((), 0.0, 0.0)
    _check_rows_cols(costs)
    reachable = ~costs.unreachable
    levels = np.unique(costs.values[reachable])
    if not _has_perfect_matching(reachable):
        raise InfeasibleAssignment("no feasible perfect matching over reachable pairs")
    lo, hi = 0, len(levels) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _has_perfect_matching(reachable & (costs.values <= levels[mid])):
            hi = mid
        else:
            lo = mid + 1
    threshold = levels[lo]
    allowed = reachable & (costs.values <= threshold)
    v = _sentinel_matrix(CostMatrix(np.where(allowed, costs.values, np.inf), ~allowed))
    return _result(costs, _lex_smallest(v, _min_sum(v)))


def allocate(costs: CostMatrix, objective: str = "sum") -> Assignment:
    if objective == "sum":
        return hungarian(costs)
    if objective == "minmax":
        return bottleneck(costs)
    raise ValueError(f"unknown objective {objective!r}; expected one of {OBJECTIVES}")
