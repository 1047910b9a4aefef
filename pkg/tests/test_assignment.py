import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hata.assignment import InfeasibleAssignment, allocate, bottleneck, hungarian
from hata.cost import CostMatrix

from oracles import best_permutations


def cm(v):
    return CostMatrix.dense(v)


def test_dominant_diagonal():
    a = hungarian(cm([[1, 9], [9, 1]]))
    assert a.mapping == (0, 1) and a.objective_sum == 2
    b = bottleneck(cm([[1, 9], [9, 1]]))
    assert b.mapping == (0, 1) and b.objective_max == 1


def test_constant_matrix_lexicographic():
    for n in range(1, 6):
        a = hungarian(cm(np.full((n, n), 3.0)))
        assert a.mapping == tuple(range(n))
        assert a.objective_sum == 3.0 * n


def test_bottleneck_sum_tie_break():
    b = bottleneck(cm([[5, 5], [5, 1]]))
    assert b.mapping == (0, 1)
    assert (b.objective_max, b.objective_sum) == (5, 6)


def test_sum_and_minmax_agree_and_diverge():
    m = cm([[4, 10], [3, 5]])
    s, x = allocate(m, "sum"), allocate(m, "minmax")
    assert s.mapping == x.mapping == (0, 1)
    assert (s.objective_sum, s.objective_max) == (9, 5)
    m = cm([[6, 2], [3, 7]])
    assert allocate(m, "sum").mapping == (1, 0)
    assert allocate(m, "minmax").objective_max == 3
    # a case where the two objectives pick different permutations
    m = cm([[1, 2], [2, 10]])
    s, x = allocate(m, "sum"), allocate(m, "minmax")
    assert s.mapping == (1, 0) and (s.objective_sum, s.objective_max) == (4, 2)
    assert x.mapping == (1, 0)
    m = cm([[0, 3], [3, 5]])
    s, x = allocate(m, "sum"), allocate(m, "minmax")
    assert s.mapping == (0, 1) and s.objective_max == 5
    assert x.mapping == (1, 0) and x.objective_max == 3 and x.objective_sum == 6


def test_unknown_objective():
    with pytest.raises(ValueError):
        allocate(cm([[1]]), "mean")


def test_infeasible_names_row_and_column():
    inf = math.inf
    with pytest.raises(InfeasibleAssignment, match="row 1"):
        hungarian(cm([[1, 2], [inf, inf]]))
    with pytest.raises(InfeasibleAssignment, match="column 0"):
        bottleneck(cm([[inf, 2], [inf, 3]]))
    with pytest.raises(InfeasibleAssignment):
        hungarian(cm([[1, 2, inf], [1, 2, inf], [1, 2, inf]]))


def test_unreachable_avoided_when_possible():
    inf = math.inf
    a = hungarian(cm([[inf, 100.0], [1.0, inf]]))
    assert a.mapping == (1, 0) and a.objective_sum == 101.0
    b = bottleneck(cm([[inf, 100.0], [1.0, inf]]))
    assert b.mapping == (1, 0)


def test_csv_export():
    m = cm([[1.0, 9.0], [9.0, 1.5]])
    text = hungarian(m).to_csv(m)
    assert text.splitlines()[:3] == ["robot_index,task_index,pair_cost", "0,0,1.0", "1,1,1.5"]


@st.composite
def matrices(draw, max_n=6):
    n = draw(st.integers(1, max_n))
    vals = draw(st.lists(st.integers(0, 12), min_size=n * n, max_size=n * n))
    return np.array(vals, dtype=float).reshape(n, n)


@given(matrices())
def test_hungarian_matches_enumeration(v):
    perms, sums, _ = best_permutations(v.tolist())
    a = hungarian(cm(v))
    best = min(sums)
    assert a.objective_sum == best
    assert a.mapping == min(p for p, s in zip(perms, sums) if s == best)


@given(matrices())
def test_bottleneck_matches_enumeration(v):
    perms, sums, maxes = best_permutations(v.tolist())
    b = bottleneck(cm(v))
    best = min(maxes)
    assert b.objective_max == best
    assert b.objective_sum == min(s for s, m in zip(sums, maxes) if m == best)


@given(matrices(), st.integers(-5, 20))
def test_constant_shift(v, k):
    if v.min() + k < 0:
        k = int(-v.min())
    a, b = hungarian(cm(v)), hungarian(cm(v + k))
    assert b.objective_sum == a.objective_sum + len(v) * k
    assert a.mapping == b.mapping


@given(matrices(), st.randoms(use_true_random=False))
def test_row_permutation_equivariance(v, rnd):
    n = len(v)
    order = list(range(n))
    rnd.shuffle(order)
    a, b = hungarian(cm(v)), hungarian(cm(v[order]))
    assert b.objective_sum == a.objective_sum
    # permuting robots moves each robot's task with it when the optimum is unique
    perms, sums, _ = best_permutations(v.tolist())
    if sums.count(min(sums)) == 1:
        assert [b.mapping[i] for i in range(n)] == [a.mapping[order[i]] for i in range(n)]
