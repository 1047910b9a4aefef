import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hata.grid import GridSpec
from hata.mod import MoDLayer, MoDStack
from hata.planner import (
    GridPath,
    OccupancyGrid,
    PlanRequest,
    Unreachable,
    astar,
    load_static_map,
    octile,
    plan,
    plan_matrix,
    save_static_map,
)
from hata.trajectories import TimeWindow

from oracles import Octo, all_distances, dijkstra_steps


def stack_of(p, resolution=1.0):
    p = np.asarray(p, dtype=float)
    spec = GridSpec(0.0, 0.0, resolution, p.shape[1], p.shape[0])
    return spec, MoDStack(spec, (MoDLayer(TimeWindow(0.0, 1800.0), p),), 0)


def test_free_grid_diagonal():
    spec, mods = stack_of(np.zeros((5, 5)), resolution=0.05)
    path = plan(OccupancyGrid.free(spec), mods, PlanRequest((0, 0), (4, 4), 0.5))
    assert path.cells == tuple((k, k) for k in range(5))
    assert path.steps == (0, 4)
    assert path.length == pytest.approx(4 * math.sqrt(2) * 0.05, abs=1e-15)


def test_corridor_threshold_detour():
    p = np.zeros((3, 5))
    p[1, 2] = 0.9
    spec, mods = stack_of(p)
    grid = OccupancyGrid.free(spec)
    detour = plan(grid, mods, PlanRequest((1, 0), (1, 4), 0.85))
    assert (1, 2) not in detour.cells
    assert detour.steps == (2, 2)
    straight = plan(grid, mods, PlanRequest((1, 0), (1, 4), 0.95))
    assert straight.cells == tuple((1, c) for c in range(5))
    assert straight.length == 4.0


def test_sealed_task_column_unreachable():
    spec = GridSpec(0.0, 0.0, 1.0, 6, 6)
    blocked = np.zeros(spec.shape, dtype=bool)
    blocked[3:6, 3] = True
    blocked[3, 3:6] = True
    grid = OccupancyGrid(spec, blocked)
    robots = [(0, 0), (0, 5), (2, 0)]
    tasks = [(1, 1), (5, 5), (2, 2)]
    m = plan_matrix(grid, None, robots, tasks)
    assert all(isinstance(row[1], Unreachable) and row[1].reason == "static" for row in m)
    assert all(isinstance(row[j], GridPath) for row in m for j in (0, 2))


def test_identity_positions_zero_length_diagonal():
    spec = GridSpec(0.0, 0.0, 1.0, 4, 4)
    cells = [(0, 0), (3, 1), (2, 3)]
    m = plan_matrix(OccupancyGrid.free(spec), None, cells, cells)
    for i, c in enumerate(cells):
        assert m[i][i].cells == (c,)
        assert m[i][i].length == 0.0


def test_single_pair_matrix():
    spec = GridSpec(0.0, 0.0, 1.0, 3, 3)
    (row,) = plan_matrix(OccupancyGrid.free(spec), None, [(0, 0)], [(0, 2)])
    assert row[0].length == 2.0


def test_delta_blockage_is_distinguished():
    p = np.zeros((3, 3))
    p[:, 1] = 0.9
    spec, mods = stack_of(p)
    with pytest.raises(Unreachable) as exc:
        plan(OccupancyGrid.free(spec), mods, PlanRequest((0, 0), (0, 2), 0.5))
    assert exc.value.reason == "delta"


def test_start_or_goal_in_crowd_rejected():
    p = np.zeros((3, 3))
    p[2, 2] = 0.7
    spec, mods = stack_of(p)
    with pytest.raises(Unreachable) as exc:
        plan(OccupancyGrid.free(spec), mods, PlanRequest((0, 0), (2, 2), 0.5))
    assert exc.value.reason == "delta"


def test_invalid_requests():
    spec = GridSpec(0.0, 0.0, 1.0, 3, 3)
    blocked = np.zeros(spec.shape, dtype=bool)
    blocked[1, 1] = True
    grid = OccupancyGrid(spec, blocked)
    with pytest.raises(ValueError):
        plan(grid, None, PlanRequest((0, 0), (1, 1)))
    with pytest.raises(ValueError):
        plan(grid, None, PlanRequest((0, 0), (3, 0)))
    with pytest.raises(ValueError):
        PlanRequest((0, 0), (1, 1), delta=1.5)
    with pytest.raises(ValueError):
        plan_matrix(grid, None, [(0, 0)], [])


def test_no_corner_cutting():
    adm = np.array([[True, False], [False, True]])
    assert astar(adm, (0, 0), (1, 1)) is None
    adm[0, 1] = True
    cells, a, d = astar(adm, (0, 0), (1, 1))
    assert (a, d) == (0, 1)


def test_mod_grid_mismatch():
    spec, mods = stack_of(np.zeros((3, 3)))
    other = OccupancyGrid.free(GridSpec(0.0, 0.0, 1.0, 4, 3))
    with pytest.raises(ValueError):
        plan(other, mods, PlanRequest((0, 0), (0, 1)))


def test_static_map_round_trip(tmp_path):
    spec = GridSpec(1.0, -2.0, 0.5, 4, 3)
    blocked = np.zeros(spec.shape, dtype=bool)
    blocked[1, 2] = True
    save_static_map(OccupancyGrid(spec, blocked), tmp_path / "m.pgm", tmp_path / "m.json")
    back = load_static_map(tmp_path / "m.pgm", tmp_path / "m.json")
    assert back.spec == spec
    assert np.array_equal(back.blocked, blocked)


def test_inflate():
    spec = GridSpec(0.0, 0.0, 1.0, 5, 5)
    blocked = np.zeros(spec.shape, dtype=bool)
    blocked[2, 2] = True
    grown = OccupancyGrid(spec, blocked).inflate(1.0)
    assert grown.blocked.sum() == 5
    assert OccupancyGrid(spec, blocked).inflate(0.0).blocked.sum() == 1


@st.composite
def instances(draw, max_side=12):
    h = draw(st.integers(1, max_side))
    w = draw(st.integers(1, max_side))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    blocked = rng.random((h, w)) < draw(st.floats(0.0, 0.4))
    p = rng.random((h, w))
    delta = draw(st.floats(0.0, 1.0))
    free = np.argwhere(~blocked)
    if len(free) == 0:
        blocked[0, 0] = False
        free = np.array([[0, 0]])
    s = tuple(int(v) for v in free[rng.integers(len(free))])
    g = tuple(int(v) for v in free[rng.integers(len(free))])
    return blocked, p, delta, s, g


@given(instances())
def test_matches_dijkstra_and_respects_threshold(inst):
    blocked, p, delta, s, g = inst
    spec, mods = stack_of(p)
    grid = OccupancyGrid(spec, blocked)
    adm = ~blocked & (p <= delta)
    expected = dijkstra_steps(adm, s, g)
    try:
        path = plan(grid, mods, PlanRequest(s, g, delta))
    except Unreachable as exc:
        assert expected is None
        endpoint_crowded = p[s] > delta or p[g] > delta
        static = dijkstra_steps(~blocked, s, g)
        assert exc.reason == ("delta" if endpoint_crowded or static is not None else "static")
        return
    assert expected == path.steps
    assert path.cells[0] == s and path.cells[-1] == g
    assert all(p[c] <= delta and not blocked[c] for c in path.cells)
    assert GridPath.from_cells(path.cells, 1.0).steps == path.steps


@given(instances(), st.floats(0.0, 1.0))
def test_lower_delta_never_shortens(inst, other):
    blocked, p, delta, s, g = inst
    lo, hi = sorted((delta, other))
    adm_hi = ~blocked & (p <= hi)
    adm_lo = ~blocked & (p <= lo)
    a = dijkstra_steps(adm_hi, s, g)
    b = dijkstra_steps(adm_lo, s, g)
    if b is not None:
        assert a is not None
        assert not Octo(*b) < Octo(*a)
    spec, mods = stack_of(p)
    grid = OccupancyGrid(spec, blocked)
    try:
        short = plan(grid, mods, PlanRequest(s, g, lo)).length
    except Unreachable:
        return
    assert plan(grid, mods, PlanRequest(s, g, hi)).length <= short + 1e-12


@given(instances(max_side=8))
def test_octile_heuristic_admissible(inst):
    blocked, _, _, _, g = inst
    for cell, (a, d) in all_distances(~blocked, g).items():
        assert octile(cell, g) <= a + d * math.sqrt(2) + 1e-12
