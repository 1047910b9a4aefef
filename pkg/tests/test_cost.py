import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hata.assignment import hungarian
from hata.cost import (
    TUNED_WEIGHTS,
    CostMatrix,
    Weights,
    baseline_costs,
    cost_matrix,
    path_cost,
    path_encounters,
)
from hata.grid import GridSpec
from hata.mod import MoDLayer, MoDLookupError, MoDStack
from hata.planner import GridPath, OccupancyGrid, plan_matrix
from hata.trajectories import TimeWindow


def stack_of(p, resolution=1.0):
    p = np.asarray(p, dtype=float)
    spec = GridSpec(0.0, 0.0, resolution, p.shape[1], p.shape[0])
    return spec, MoDStack(spec, (MoDLayer(TimeWindow(0.0, 1800.0), p),), 0)


def test_single_cell_costs_nothing():
    _, mods = stack_of(np.full((2, 2), 0.5))
    assert path_cost(GridPath(((0, 0),), 1.0), mods, 0.0, Weights()) == 0.0


def test_axial_step_pure_distance():
    _, mods = stack_of(np.zeros((1, 2)), resolution=0.05)
    path = GridPath.from_cells([(0, 0), (0, 1)], 0.05)
    assert path_cost(path, mods, 0.0, Weights(1.0, 0.0)) == pytest.approx(0.05, abs=1e-15)


def test_three_cell_hand_sum():
    _, mods = stack_of([[0.7, 0.2, 0.4]], resolution=0.05)
    path = GridPath.from_cells([(0, 0), (0, 1), (0, 2)], 0.05)
    assert path_cost(path, mods, 0.0, TUNED_WEIGHTS) == pytest.approx(0.685, abs=1e-12)


def test_time_outside_stack():
    _, mods = stack_of(np.zeros((1, 2)))
    with pytest.raises(MoDLookupError):
        path_cost(GridPath.from_cells([(0, 0), (0, 1)], 1.0), mods, 1800.0, Weights())


def test_weights_validation():
    with pytest.raises(ValueError):
        Weights(-1.0, 1.0)
    with pytest.raises(ValueError):
        Weights(0.0, 0.0)


def test_two_by_two_elementwise():
    p = np.array([[0.0, 0.3, 0.1], [0.5, 0.0, 0.2]])
    spec, mods = stack_of(p)
    grid = OccupancyGrid.free(spec)
    robots, tasks = [(0, 0), (1, 2)], [(0, 2), (1, 0)]
    paths = plan_matrix(grid, mods, robots, tasks)
    w = Weights(2.0, 3.0)
    m = cost_matrix(paths, mods, 0.0, w)
    for i in range(2):
        for j in range(2):
            cells = paths[i][j].cells
            hand = w.w0 * paths[i][j].length + w.w1 * sum(p[c] for c in cells[1:])
            assert m.values[i, j] == pytest.approx(hand, abs=1e-12)


def test_zero_length_paths_zero_matrix():
    spec, mods = stack_of(np.full((3, 3), 0.4))
    cells = [(0, 0), (2, 2)]
    m = cost_matrix(plan_matrix(OccupancyGrid.free(spec), mods, cells, cells), mods, 0.0, Weights())
    assert m.values[0, 0] == 0.0 and m.values[1, 1] == 0.0


def test_euclidean_three_four_five():
    spec = GridSpec(-0.5, -0.5, 1.0, 5, 5)
    m = baseline_costs([(0, 0), (4, 3)], [(4, 3), (0, 0)], OccupancyGrid.free(spec), "euclidean")
    assert m.values[0, 0] == 5.0
    assert m.values[0, 1] == 0.0


def test_colocated_zero_in_both_modes():
    spec = GridSpec(0.0, 0.0, 1.0, 3, 3)
    grid = OccupancyGrid.free(spec)
    for mode in ("euclidean", "path_length"):
        assert baseline_costs([(1, 1)], [(1, 1)], grid, mode).values[0, 0] == 0.0
    with pytest.raises(ValueError):
        baseline_costs([(1, 1)], [(1, 1)], grid, "manhattan")


def test_path_length_mode_propagates_unreachable():
    spec = GridSpec(0.0, 0.0, 1.0, 3, 3)
    blocked = np.zeros(spec.shape, dtype=bool)
    blocked[:, 1] = True
    m = baseline_costs([(0, 0), (0, 2)], [(2, 0), (2, 2)], OccupancyGrid(spec, blocked), "path_length")
    assert m.unreachable.tolist() == [[False, True], [True, False]]


def test_csv_round_trip_with_unreachable():
    m = CostMatrix.dense([[1.5, math.inf], [0.0, 2.25]])
    text = m.to_csv()
    assert text == "1.5,\n0.0,2.25\n"
    back = CostMatrix.from_csv(text)
    assert np.array_equal(back.values, m.values)
    assert np.array_equal(back.unreachable, m.unreachable)


def test_sampled_encounters_seeded():
    _, mods = stack_of(np.full((1, 6), 0.5))
    path = GridPath.from_cells([(0, c) for c in range(6)], 1.0)
    a = path_encounters(path, mods, 0.0, np.random.default_rng(4))
    b = path_encounters(path, mods, 0.0, np.random.default_rng(4))
    assert a == b and a == int(a) and 0 <= a <= 5
    assert path_encounters(path, mods, 0.0) == 2.5


@st.composite
def worlds(draw):
    h, w = draw(st.integers(2, 8)), draw(st.integers(2, 8))
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    n = draw(st.integers(1, 4))
    cells = [(int(rng.integers(h)), int(rng.integers(w))) for _ in range(2 * n)]
    return rng.random((h, w)), cells[:n], cells[n:], draw(st.floats(0.1, 4.0))


@given(worlds(), st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_linear_in_weights(world, a, b):
    p, robots, tasks, _ = world
    spec, mods = stack_of(p)
    paths = plan_matrix(OccupancyGrid.free(spec), mods, robots, tasks)
    for row in paths:
        for path in row:
            d = path_cost(path, mods, 0.0, Weights(1.0, 0.0))
            e = path_cost(path, mods, 0.0, Weights(0.0, 1.0))
            if a == 0 and b == 0:
                continue
            assert path_cost(path, mods, 0.0, Weights(a, b)) == pytest.approx(a * d + b * e, rel=1e-12, abs=1e-12)


@given(worlds())
def test_scaling_keeps_assignment(world):
    p, robots, tasks, lam = world
    spec, mods = stack_of(p)
    paths = plan_matrix(OccupancyGrid.free(spec), mods, robots, tasks)
    base = cost_matrix(paths, mods, 0.0, TUNED_WEIGHTS)
    scaled = cost_matrix(paths, mods, 0.0, Weights(lam * TUNED_WEIGHTS.w0, lam * TUNED_WEIGHTS.w1))
    assert np.allclose(scaled.values, lam * base.values, rtol=1e-12)
    a, b = hungarian(base), hungarian(scaled)
    assert b.objective_sum == pytest.approx(lam * a.objective_sum, rel=1e-9)
    # the chosen permutation is optimal for both matrices
    n = len(robots)
    assert base.values[np.arange(n), list(b.mapping)].sum() == pytest.approx(a.objective_sum, rel=1e-9, abs=1e-12)


@given(worlds(), st.floats(0.0, 10.0))
def test_zero_crowd_matches_path_length(world, w1):
    p, robots, tasks, _ = world
    spec, mods = stack_of(np.zeros_like(p))
    grid = OccupancyGrid.free(spec)
    bids = cost_matrix(plan_matrix(grid, mods, robots, tasks), mods, 0.0, Weights(1.0, w1))
    assert np.array_equal(bids.values, baseline_costs(robots, tasks, grid).values)


@given(worlds())
def test_path_length_close_to_euclidean(world):
    _, robots, tasks, _ = world
    spec = GridSpec(0.0, 0.0, 1.0, 8, 8)
    grid = OccupancyGrid.free(spec)
    e = baseline_costs(robots, tasks, grid, "euclidean").values
    g = baseline_costs(robots, tasks, grid, "path_length").values
    assert np.all(g >= e - 1e-12)
    # octile over euclidean peaks at sqrt(4 - 2 sqrt 2) ~ 1.0824
    assert np.all(g <= e * 1.083 + 1e-12)
